#pragma once

// Seeded generator of small entity-annotated corpora with planted relation phrasings.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "relx/corpus.hpp"
#include "relx/numerics.hpp"

namespace relx {

struct SyntheticOptions {
  std::size_t sentences = 600;
  std::size_t persons = 30;
  std::size_t organizations = 20;
  std::size_t locations = 20;
  /// Share of entity pairs labeled NA.
  double na_fraction = 0.25;
  std::size_t max_sentences_per_pair = 4;
  std::uint64_t seed = 1;
};

namespace detail {

struct Phrasing {
  std::string relation;
  EntityType head;
  EntityType tail;
  std::vector<std::vector<std::string>> patterns;  // "X"/"Y" slots
};

inline const std::vector<Phrasing>& synthetic_phrasings() {
  static const std::vector<Phrasing> p{
      {"/people/person/place_lived",
       EntityType::Person,
       EntityType::Location,
       {{"X", "grew", "up", "in", "Y"}, {"X", "lived", "in", "Y", "for", "years"}, {"X", "moved", "to", "Y", "with", "family"}}},
      {"/business/person/company",
       EntityType::Person,
       EntityType::Organization,
       {{"X", "works", "at", "Y"}, {"X", "joined", "Y", "as", "an", "engineer"}, {"X", "was", "hired", "by", "Y"}}},
      {"/business/company/location",
       EntityType::Organization,
       EntityType::Location,
       {{"X", "is", "headquartered", "in", "Y"}, {"X", "opened", "an", "office", "in", "Y"}, {"X", "is", "based", "in", "Y"}}},
  };
  return p;
}

inline const std::vector<std::vector<std::string>>& na_patterns() {
  static const std::vector<std::vector<std::string>> p{
      {"X", "criticized", "Y", "in", "a", "statement"},
      {"X", "and", "Y", "appeared", "in", "the", "same", "report"},
      {"X", "mentioned", "Y", "during", "an", "interview"},
      {"critics", "compared", "X", "with", "Y"},
  };
  return p;
}

inline const std::vector<std::string>& fillers() {
  static const std::vector<std::string> f{"yesterday", "reportedly", "sources", "said", "on", "monday",
                                          "the",       "newspaper",  "noted",   "last", "week", "officials"};
  return f;
}

inline std::string synthetic_name(std::size_t index, char kind) {
  static const char* onsets[] = {"b", "d", "k", "l", "m", "n", "r", "s", "t", "v", "z", "g"};
  static const char* vowels[] = {"a", "e", "i", "o", "u"};
  std::string name;
  std::size_t v = index * 7 + static_cast<std::size_t>(kind);
  for (int syll = 0; syll < 3; ++syll) {
    name += onsets[v % 12];
    name += vowels[(v / 12) % 5];
    v /= 3;
    v += index + static_cast<std::size_t>(syll) * 5;
  }
  return name + kind + std::to_string(index);
}

}  // namespace detail

/// Relation is a property of the entity pair; each pair contributes 1..max sentences
/// whose wording comes from that relation's planted patterns.
inline std::vector<SentenceInstance> make_synthetic_corpus(const SyntheticOptions& options) {
  Rng rng(options.seed);
  auto entity = [](EntityType type, std::size_t index) {
    const char kind = type == EntityType::Person ? 'p' : type == EntityType::Organization ? 'o' : 'l';
    return std::pair<std::string, std::string>{detail::synthetic_name(index, kind),
                                               std::string("m.") + kind + std::to_string(index)};
  };
  auto count_of = [&](EntityType type) {
    return type == EntityType::Person ? options.persons
           : type == EntityType::Organization ? options.organizations
                                               : options.locations;
  };

  std::vector<SentenceInstance> out;
  while (out.size() < options.sentences) {
    const bool na = rng.uniform01() < options.na_fraction;
    const auto& phr = detail::synthetic_phrasings()[rng.below(3)];
    const auto h = rng.below(count_of(phr.head));
    const auto t = rng.below(count_of(phr.tail));
    const auto [head_name, head_id] = entity(phr.head, h);
    const auto [tail_name, tail_id] = entity(phr.tail, t);
    const std::size_t n = 1 + rng.below(options.max_sentences_per_pair);
    for (std::size_t i = 0; i < n && out.size() < options.sentences; ++i) {
      const auto& pattern = na ? detail::na_patterns()[rng.below(detail::na_patterns().size())]
                               : phr.patterns[rng.below(phr.patterns.size())];
      SentenceInstance s;
      const std::size_t lead = rng.below(3);
      for (std::size_t f = 0; f < lead; ++f) s.tokens.push_back(detail::fillers()[rng.below(detail::fillers().size())]);
      for (const auto& piece : pattern) {
        if (piece == "X") {
          s.mentions.push_back({head_name, head_id, phr.head, s.tokens.size(), s.tokens.size() + 1});
          s.tokens.push_back(head_name);
        } else if (piece == "Y") {
          s.mentions.push_back({tail_name, tail_id, phr.tail, s.tokens.size(), s.tokens.size() + 1});
          s.tokens.push_back(tail_name);
        } else {
          s.tokens.push_back(piece);
        }
      }
      const std::size_t trail = rng.below(3);
      for (std::size_t f = 0; f < trail; ++f)
        s.tokens.push_back(detail::fillers()[rng.below(detail::fillers().size())]);
      // Mentions were appended in slot order; head is always the X slot.
      const bool x_first = s.mentions[0].entity_id == head_id;
      s.head = x_first ? 0 : 1;
      s.tail = x_first ? 1 : 0;
      s.relation_label = na ? std::string(kNaLabel) : phr.relation;
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace relx
