#pragma once

// Corpus expansion from code-table itemsets.
//
// Each non-singleton code-table itemset is a base. A base holding an entity pair that
// fits a relation template yields instances directly; a base holding only part of a
// pair is unioned with its most similar peers until a pair appears or k peers have
// been consumed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "relx/corpus.hpp"
#include "relx/error.hpp"
#include "relx/krimp.hpp"

namespace relx {

enum class SimilarityMetric { Cosine, Jaccard };

inline std::string_view to_string(SimilarityMetric m) { return m == SimilarityMetric::Cosine ? "cosine" : "jaccard"; }

inline std::optional<SimilarityMetric> parse_metric(std::string_view text) {
  if (text == "cosine") return SimilarityMetric::Cosine;
  if (text == "jaccard") return SimilarityMetric::Jaccard;
  return std::nullopt;
}

inline std::size_t intersection_size(const Itemset& a, const Itemset& b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n, ++i, ++j;
    }
  }
  return n;
}

/// Set similarity of two sorted itemsets. Cosine treats them as binary indicator vectors.
inline double similarity(const Itemset& a, const Itemset& b, SimilarityMetric metric) {
  if (a.empty() || b.empty()) throw DomainError("similarity of an empty itemset");
  const auto common = static_cast<double>(intersection_size(a, b));
  if (metric == SimilarityMetric::Jaccard) {
    return common / (static_cast<double>(a.size() + b.size()) - common);
  }
  return common / std::sqrt(static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

// ---------------------------------------------------------------------------

struct EntityRecord {
  std::string entity_id;
  std::string name;
  EntityType type = EntityType::Person;

  bool operator==(const EntityRecord&) const = default;
};

/// Item id -> the entity whose name contains that word.
class EntityLexicon {
 public:
  /// When two entities claim one item, the smaller entity id keeps it.
  void add(Item item, EntityRecord record) {
    auto [it, inserted] = records_.try_emplace(item, record);
    if (!inserted && record.entity_id < it->second.entity_id) it->second = std::move(record);
  }
  const EntityRecord* find(Item item) const {
    auto it = records_.find(item);
    return it == records_.end() ? nullptr : &it->second;
  }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

 private:
  std::map<Item, EntityRecord> records_;
};

/// Every vocabulary word occurring in a mention's surface name becomes an entity word.
inline EntityLexicon build_entity_lexicon(const std::vector<SentenceInstance>& instances, const Vocabulary& vocab) {
  EntityLexicon lex;
  for (const auto& s : instances) {
    for (const auto& m : s.mentions) {
      for (const auto& word : split_words(m.surface_name)) {
        if (auto item = vocab.find(lowercase(word))) lex.add(*item, {m.entity_id, m.surface_name, m.entity_type});
      }
    }
  }
  return lex;
}

struct RelationTemplate {
  std::string relation_label;
  EntityType head_type = EntityType::Person;
  EntityType tail_type = EntityType::Person;
  std::vector<std::string> surface_pattern;  // "X" and "Y" are the slots
};

inline std::vector<RelationTemplate> default_templates() {
  return {
      {"/business/company/location", EntityType::Organization, EntityType::Location, {"X", "has", "location", "Y"}},
      {"/people/person/place_lived", EntityType::Person, EntityType::Location, {"X", "has", "location", "Y"}},
      {"/business/person/company", EntityType::Person, EntityType::Organization, {"X", "has", "organization", "Y"}},
  };
}

enum class ItemsetClass { Ideal, HalfIdeal, NotIdeal };

inline std::string_view to_string(ItemsetClass c) {
  switch (c) {
    case ItemsetClass::Ideal: return "IDEAL";
    case ItemsetClass::HalfIdeal: return "HALF_IDEAL";
    case ItemsetClass::NotIdeal: return "NOT_IDEAL";
  }
  return "?";
}

struct TemplateMatch {
  std::size_t template_index = 0;
  EntityRecord head;
  EntityRecord tail;
};

/// Distinct entities named by the itemset, keyed by entity id.
inline std::map<std::string, EntityRecord> entities_in(const Itemset& items, const EntityLexicon& lex) {
  std::map<std::string, EntityRecord> out;
  for (Item i : items)
    if (const auto* rec = lex.find(i)) out.emplace(rec->entity_id, *rec);
  return out;
}

/// At most one match per template: the smallest entity id of each role.
inline std::vector<TemplateMatch> match_templates(const Itemset& items, const EntityLexicon& lex,
                                                  const std::vector<RelationTemplate>& templates) {
  const auto entities = entities_in(items, lex);
  std::vector<TemplateMatch> out;
  for (std::size_t t = 0; t < templates.size(); ++t) {
    const auto& tpl = templates[t];
    const EntityRecord* head = nullptr;
    for (const auto& [id, rec] : entities) {
      if (rec.type == tpl.head_type) {
        head = &rec;
        break;
      }
    }
    if (!head) continue;
    for (const auto& [id, rec] : entities) {
      if (rec.type == tpl.tail_type && id != head->entity_id) {
        out.push_back({t, *head, rec});
        break;
      }
    }
  }
  return out;
}

inline ItemsetClass classify_itemset(const Itemset& items, const EntityLexicon& lex,
                                     const std::vector<RelationTemplate>& templates) {
  if (!match_templates(items, lex, templates).empty()) return ItemsetClass::Ideal;
  for (Item i : items)
    if (lex.find(i)) return ItemsetClass::HalfIdeal;
  return ItemsetClass::NotIdeal;
}

// ---------------------------------------------------------------------------

struct GeneratedInstance {
  std::string relation_label;
  EntityMention head;
  EntityMention tail;
  Itemset merged_itemset;
  std::string template_sentence;
  std::size_t base_index = 0;
  std::size_t k_used = 0;

  bool operator==(const GeneratedInstance&) const = default;
};

inline GeneratedInstance instantiate_template(const EntityRecord& head, const EntityRecord& tail,
                                              const RelationTemplate& tpl, Itemset merged_itemset,
                                              std::size_t base_index = 0, std::size_t k_used = 0) {
  if (head.type != tpl.head_type || tail.type != tpl.tail_type) {
    throw ContractViolation("entity types " + std::string(to_string(head.type)) + "/" +
                            std::string(to_string(tail.type)) + " do not fit template " + tpl.relation_label);
  }
  GeneratedInstance out;
  out.relation_label = tpl.relation_label;
  out.merged_itemset = std::move(merged_itemset);
  out.base_index = base_index;
  out.k_used = k_used;

  std::vector<std::string> tokens;
  auto place = [&tokens](const EntityRecord& rec) {
    EntityMention m{rec.name, rec.entity_id, rec.type, tokens.size(), 0};
    for (auto& w : split_words(rec.name)) tokens.push_back(std::move(w));
    m.end = tokens.size();
    return m;
  };
  for (const auto& piece : tpl.surface_pattern) {
    if (piece == "X") {
      out.head = place(head);
    } else if (piece == "Y") {
      out.tail = place(tail);
    } else {
      tokens.push_back(piece);
    }
  }
  out.template_sentence = join_words(tokens);
  return out;
}

inline SentenceInstance to_sentence(const GeneratedInstance& g) {
  SentenceInstance s;
  s.tokens = split_words(g.template_sentence);
  s.mentions = {g.head, g.tail};
  s.head = 0;
  s.tail = 1;
  s.relation_label = g.relation_label;
  s.provenance = Provenance::Generated;
  return s;
}

struct ExpandOptions {
  std::size_t k = 7;
  SimilarityMetric metric = SimilarityMetric::Jaccard;
  bool all_tie_branches = false;
  /// Upper bound on explored branches per base when all tie branches are enumerated.
  std::size_t branch_cap = 4096;
};

/// Other non-singleton entries ranked by similarity to the base, grouped into ranks of
/// equal similarity. Each group holds entry indices in lexicographic itemset order.
inline std::vector<std::vector<std::size_t>> similarity_ranks(std::size_t base_index, const CodeTable& ct,
                                                              SimilarityMetric metric) {
  const auto& base = ct.entry(base_index).itemset;
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < ct.size(); ++i) {
    if (i == base_index || ct.entry(i).itemset.size() < 2) continue;
    scored.emplace_back(similarity(base, ct.entry(i).itemset, metric), i);
  }
  std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return ct.entry(a.second).itemset < ct.entry(b.second).itemset;
  });
  std::vector<std::vector<std::size_t>> ranks;
  constexpr double kTieTolerance = 1e-12;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (i == 0 || std::abs(scored[i].first - scored[i - 1].first) > kTieTolerance) ranks.emplace_back();
    ranks.back().push_back(scored[i].second);
  }
  return ranks;
}

namespace detail {

inline Itemset set_union(const Itemset& a, const Itemset& b) {
  Itemset out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline void emit_matches(const Itemset& merged, std::size_t base_index, std::size_t k_used, const EntityLexicon& lex,
                         const std::vector<RelationTemplate>& templates, std::vector<GeneratedInstance>& out) {
  for (const auto& match : match_templates(merged, lex, templates)) {
    out.push_back(
        instantiate_template(match.head, match.tail, templates[match.template_index], merged, base_index, k_used));
  }
}

}  // namespace detail

/// Instances derivable from one code-table entry. Empty when the base names no entity
/// or when k ranks of peers cannot complete a pair.
inline std::vector<GeneratedInstance> expand_base(std::size_t base_index, const CodeTable& ct,
                                                  const EntityLexicon& lex,
                                                  const std::vector<RelationTemplate>& templates,
                                                  const ExpandOptions& options) {
  std::vector<GeneratedInstance> out;
  const auto& base = ct.entry(base_index).itemset;
  switch (classify_itemset(base, lex, templates)) {
    case ItemsetClass::NotIdeal: return out;
    case ItemsetClass::Ideal: detail::emit_matches(base, base_index, 0, lex, templates, out); return out;
    case ItemsetClass::HalfIdeal: break;
  }

  const auto ranks = similarity_ranks(base_index, ct, options.metric);
  const std::size_t depth_limit = std::min(options.k, ranks.size());

  if (!options.all_tie_branches) {
    Itemset merged = base;
    for (std::size_t depth = 0; depth < depth_limit; ++depth) {
      merged = detail::set_union(merged, ct.entry(ranks[depth].front()).itemset);
      if (classify_itemset(merged, lex, templates) == ItemsetClass::Ideal) {
        detail::emit_matches(merged, base_index, depth + 1, lex, templates, out);
        break;
      }
    }
    return out;
  }

  // Every choice of one member per rank, each branch stopping at its first pair.
  std::set<Itemset> seen;
  std::size_t branches = 0;
  struct Frame {
    Itemset merged;
    std::size_t depth;
  };
  std::vector<Frame> stack{{base, 0}};
  while (!stack.empty()) {
    Frame frame = std::move(stack.back());
    stack.pop_back();
    if (frame.depth >= depth_limit) continue;
    const auto& group = ranks[frame.depth];
    // Reverse push so the lexicographically smallest member is explored first.
    for (auto it = group.rbegin(); it != group.rend(); ++it) {
      if (++branches > options.branch_cap) {
        warn("tie-branch cap reached for base " + std::to_string(base_index));
        stack.clear();
        break;
      }
      Itemset merged = detail::set_union(frame.merged, ct.entry(*it).itemset);
      if (classify_itemset(merged, lex, templates) == ItemsetClass::Ideal) {
        if (seen.insert(merged).second)
          detail::emit_matches(merged, base_index, frame.depth + 1, lex, templates, out);
      } else {
        stack.push_back({std::move(merged), frame.depth + 1});
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.k_used != b.k_used) return a.k_used < b.k_used;
    return a.merged_itemset < b.merged_itemset;
  });
  return out;
}

struct ExpansionResult {
  std::vector<SentenceInstance> instances;    // original followed by generated
  std::vector<GeneratedInstance> generated;  // after deduplication, in base order
};

/// Walks the non-singleton entries in cover order and appends one sentence per distinct
/// (entity pair, relation, template sentence).
inline ExpansionResult expand_database(const std::vector<SentenceInstance>& instances, const CodeTable& ct,
                                       const EntityLexicon& lex, const std::vector<RelationTemplate>& templates,
                                       const ExpandOptions& options) {
  ExpansionResult result;
  result.instances = instances;
  std::set<std::tuple<std::string, std::string, std::string, std::string>> seen;
  for (std::size_t base = 0; base < ct.size(); ++base) {
    if (ct.entry(base).itemset.size() < 2) continue;
    for (auto& g : expand_base(base, ct, lex, templates, options)) {
      if (!seen.emplace(g.head.entity_id, g.tail.entity_id, g.relation_label, g.template_sentence).second) continue;
      result.instances.push_back(to_sentence(g));
      result.generated.push_back(std::move(g));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Expansion report: one tab-separated line per generated instance.

inline void write_expansion_report(std::ostream& out, const std::vector<GeneratedInstance>& generated,
                                   const Vocabulary& vocab) {
  out << "#relation\tentity1.id\tentity1.name\tentity2.id\tentity2.name\tF*\tTP\tbase_index\tk_used\n";
  for (const auto& g : generated) {
    std::vector<std::string> words;
    for (Item i : g.merged_itemset) words.push_back(i < vocab.size() ? vocab.word(i) : std::to_string(i));
    out << g.relation_label << '\t' << g.head.entity_id << '\t' << g.head.surface_name << '\t' << g.tail.entity_id
        << '\t' << g.tail.surface_name << '\t' << join_words(words) << '\t' << g.template_sentence << '\t'
        << g.base_index << '\t' << g.k_used << '\n';
  }
}

}  // namespace relx
