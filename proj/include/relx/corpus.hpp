#pragma once

// Entity-annotated sentence corpus: parsing, vocabulary, transactions, bags.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "relx/error.hpp"

namespace relx {

using Item = std::uint32_t;
using Itemset = std::vector<Item>;

inline constexpr std::string_view kNaLabel = "NA";

enum class EntityType { Person, Location, Organization };

inline std::string_view to_string(EntityType type) {
  switch (type) {
    case EntityType::Person: return "PERSON";
    case EntityType::Location: return "LOCATION";
    case EntityType::Organization: return "ORGANIZATION";
  }
  return "?";
}

inline std::optional<EntityType> parse_entity_type(std::string_view text) {
  if (text == "PERSON") return EntityType::Person;
  if (text == "LOCATION") return EntityType::Location;
  if (text == "ORGANIZATION") return EntityType::Organization;
  return std::nullopt;
}

enum class Provenance { Original, Generated };

inline std::string_view to_string(Provenance p) {
  return p == Provenance::Original ? "ORIGINAL" : "GENERATED";
}

struct EntityMention {
  std::string surface_name;
  std::string entity_id;
  EntityType entity_type = EntityType::Person;
  std::size_t start = 0;  // token_span = [start, end)
  std::size_t end = 0;

  bool operator==(const EntityMention&) const = default;
};

struct SentenceInstance {
  std::vector<std::string> tokens;
  std::vector<EntityMention> mentions;
  std::optional<std::size_t> head;
  std::optional<std::size_t> tail;
  std::string relation_label{kNaLabel};
  Provenance provenance = Provenance::Original;

  bool is_na() const { return relation_label == kNaLabel; }
  bool has_pair() const { return head.has_value() && tail.has_value(); }
  const EntityMention& head_mention() const { return mentions.at(*head); }
  const EntityMention& tail_mention() const { return mentions.at(*tail); }

  bool operator==(const SentenceInstance&) const = default;
};

inline std::string lowercase(std::string_view word) {
  std::string out(word);
  for (char& c : out) {
    if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

/// Splits on single ASCII spaces, dropping empty pieces.
inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t next = text.find(' ', pos);
    if (next == std::string_view::npos) next = text.size();
    if (next > pos) out.emplace_back(text.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

inline std::string join_words(const std::vector<std::string>& words, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += sep;
    out += words[i];
  }
  return out;
}

/// Throws ParseError (line 0 when not parsing a file) naming the first violated field.
inline void validate(const SentenceInstance& s, std::size_t line = 0) {
  if (s.tokens.empty()) throw ParseError(line, "tokens", "sentence has no tokens");
  for (std::size_t m = 0; m < s.mentions.size(); ++m) {
    const auto& mention = s.mentions[m];
    if (mention.start >= mention.end)
      throw ParseError(line, "mentions[" + std::to_string(m) + "]", "empty token span");
    if (mention.end > s.tokens.size())
      throw ParseError(line, "mentions[" + std::to_string(m) + "].end",
                       "span end " + std::to_string(mention.end) + " exceeds token count " +
                           std::to_string(s.tokens.size()));
  }
  if (s.head && *s.head >= s.mentions.size()) throw ParseError(line, "head", "mention index out of range");
  if (s.tail && *s.tail >= s.mentions.size()) throw ParseError(line, "tail", "mention index out of range");
  if (!s.is_na()) {
    if (!s.has_pair()) throw ParseError(line, "relation", "labeled sentence needs head and tail");
    if (*s.head == *s.tail) throw ParseError(line, "tail", "head and tail refer to the same mention");
  }
}

// ---------------------------------------------------------------------------
// Sentence file: one JSON object per line.

inline nlohmann::json to_json(const SentenceInstance& s) {
  nlohmann::json mentions = nlohmann::json::array();
  for (const auto& m : s.mentions) {
    mentions.push_back({{"name", m.surface_name},
                        {"id", m.entity_id},
                        {"type", std::string(to_string(m.entity_type))},
                        {"start", m.start},
                        {"end", m.end}});
  }
  nlohmann::json j;
  j["tokens"] = s.tokens;
  j["mentions"] = std::move(mentions);
  j["head"] = s.head ? nlohmann::json(*s.head) : nlohmann::json(nullptr);
  j["tail"] = s.tail ? nlohmann::json(*s.tail) : nlohmann::json(nullptr);
  j["relation"] = s.relation_label;
  j["provenance"] = std::string(to_string(s.provenance));
  return j;
}

namespace detail {

template <typename T>
T required_field(const nlohmann::json& j, const char* field, std::size_t line) {
  if (!j.contains(field)) throw ParseError(line, field, "missing");
  try {
    return j.at(field).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(line, field, e.what());
  }
}

inline std::optional<std::size_t> optional_index(const nlohmann::json& j, const char* field, std::size_t line) {
  if (!j.contains(field) || j.at(field).is_null()) return std::nullopt;
  if (!j.at(field).is_number_unsigned()) throw ParseError(line, field, "expected a mention index or null");
  return j.at(field).get<std::size_t>();
}

}  // namespace detail

inline SentenceInstance parse_sentence(std::string_view text, std::size_t line = 0) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(line, "record", e.what());
  }
  if (!j.is_object()) throw ParseError(line, "record", "expected a JSON object");

  SentenceInstance s;
  s.tokens = detail::required_field<std::vector<std::string>>(j, "tokens", line);
  if (j.contains("mentions")) {
    const auto& arr = j.at("mentions");
    if (!arr.is_array()) throw ParseError(line, "mentions", "expected an array");
    for (std::size_t m = 0; m < arr.size(); ++m) {
      const auto& mj = arr[m];
      const std::string prefix = "mentions[" + std::to_string(m) + "].";
      auto field = [&](const char* name) -> const nlohmann::json& {
        if (!mj.is_object() || !mj.contains(name)) throw ParseError(line, prefix + name, "missing");
        return mj.at(name);
      };
      EntityMention mention;
      try {
        mention.surface_name = field("name").get<std::string>();
        mention.entity_id = field("id").get<std::string>();
        mention.start = field("start").get<std::size_t>();
        mention.end = field("end").get<std::size_t>();
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(line, prefix.substr(0, prefix.size() - 1), e.what());
      }
      const auto& type_field = field("type");
      auto type = type_field.is_string() ? parse_entity_type(type_field.get<std::string>()) : std::nullopt;
      if (!type) throw ParseError(line, prefix + "type", "unknown entity type " + type_field.dump());
      mention.entity_type = *type;
      s.mentions.push_back(std::move(mention));
    }
  }
  s.head = detail::optional_index(j, "head", line);
  s.tail = detail::optional_index(j, "tail", line);
  s.relation_label = j.contains("relation") ? detail::required_field<std::string>(j, "relation", line)
                                            : std::string(kNaLabel);
  if (j.contains("provenance")) {
    auto p = detail::required_field<std::string>(j, "provenance", line);
    if (p == "ORIGINAL")
      s.provenance = Provenance::Original;
    else if (p == "GENERATED")
      s.provenance = Provenance::Generated;
    else
      throw ParseError(line, "provenance", "unknown provenance '" + p + "'");
  }
  validate(s, line);
  return s;
}

inline std::vector<SentenceInstance> read_corpus(std::istream& in) {
  std::vector<SentenceInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_sentence(line, line_no));
  }
  return out;
}

inline std::vector<SentenceInstance> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read corpus file '" + path + "'");
  return read_corpus(in);
}

inline void write_corpus(std::ostream& out, const std::vector<SentenceInstance>& instances) {
  for (const auto& s : instances) out << to_json(s).dump() << '\n';
}

// ---------------------------------------------------------------------------

/// Frequency-thresholded word list with dense item ids.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Entries must already be in item-id order.
  Vocabulary(std::vector<std::pair<std::string, std::size_t>> entries, std::size_t min_frequency)
      : min_frequency_(min_frequency) {
    for (auto& [word, freq] : entries) {
      item_of_word_.emplace(word, static_cast<Item>(words_.size()));
      words_.push_back(std::move(word));
      frequency_.push_back(freq);
    }
  }

  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }
  std::size_t min_frequency() const { return min_frequency_; }

  std::optional<Item> find(std::string_view word) const {
    auto it = item_of_word_.find(std::string(word));
    if (it == item_of_word_.end()) return std::nullopt;
    return it->second;
  }
  const std::string& word(Item item) const { return words_.at(item); }
  std::size_t frequency(Item item) const { return frequency_.at(item); }
  const std::vector<std::string>& words() const { return words_; }

  bool operator==(const Vocabulary& other) const {
    return words_ == other.words_ && frequency_ == other.frequency_;
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::size_t> frequency_;
  std::unordered_map<std::string, Item> item_of_word_;
  std::size_t min_frequency_ = 1;
};

/// Keeps lowercased words counted at least `min_frequency` times. Ids ordered by
/// frequency descending, then word.
inline Vocabulary build_vocabulary(const std::vector<SentenceInstance>& instances, std::size_t min_frequency,
                                   const std::unordered_set<std::string>& stopwords = {}) {
  if (min_frequency < 1) throw DomainError("min_frequency must be at least 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& s : instances)
    for (const auto& token : s.tokens) ++counts[lowercase(token)];

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [word, count] : counts) {
    if (count >= min_frequency && !stopwords.contains(word)) kept.emplace_back(word, count);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return Vocabulary(std::move(kept), min_frequency);
}

inline std::unordered_set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read stopword file '" + path + "'");
  std::unordered_set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) out.insert(lowercase(line));
  }
  return out;
}

inline void write_vocabulary(std::ostream& out, const Vocabulary& vocab) {
  for (Item i = 0; i < vocab.size(); ++i) out << vocab.word(i) << '\t' << i << '\t' << vocab.frequency(i) << '\n';
}

inline Vocabulary read_vocabulary(std::istream& in, std::size_t min_frequency = 1) {
  std::vector<std::pair<std::string, std::size_t>> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string word, id_text, freq_text;
    if (!std::getline(fields, word, '\t') || !std::getline(fields, id_text, '\t') ||
        !std::getline(fields, freq_text, '\t'))
      throw ParseError(line_no, "record", "expected word<TAB>item_id<TAB>frequency");
    std::size_t id = 0, freq = 0;
    try {
      id = std::stoul(id_text);
      freq = std::stoul(freq_text);
    } catch (const std::exception&) {
      throw ParseError(line_no, "item_id", "not an integer");
    }
    if (id != entries.size()) throw ParseError(line_no, "item_id", "ids must be contiguous from 0");
    entries.emplace_back(word, freq);
  }
  return Vocabulary(std::move(entries), min_frequency);
}

inline Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read vocabulary file '" + path + "'");
  return read_vocabulary(in);
}

// ---------------------------------------------------------------------------

struct Transaction {
  Itemset items;  // strictly ascending
  std::size_t source = 0;

  bool operator==(const Transaction&) const = default;
};

inline std::vector<Transaction> to_transactions(const std::vector<SentenceInstance>& instances,
                                                const Vocabulary& vocab) {
  std::vector<Transaction> out;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    Itemset items;
    for (const auto& token : instances[i].tokens)
      if (auto item = vocab.find(lowercase(token))) items.push_back(*item);
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    if (!items.empty()) out.push_back({std::move(items), i});
  }
  return out;
}

// ---------------------------------------------------------------------------

struct Bag {
  std::pair<std::string, std::string> entity_pair;
  std::string relation_label;
  std::vector<std::size_t> sentence_indices;

  bool operator==(const Bag&) const = default;
};

/// One bag per (head id, tail id, relation), in lexicographic order of that triple.
/// Sentences without a head/tail pair cannot be encoded and are left out.
inline std::vector<Bag> group_bags(const std::vector<SentenceInstance>& instances) {
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& s = instances[i];
    if (!s.has_pair()) continue;
    groups[{s.head_mention().entity_id, s.tail_mention().entity_id, s.relation_label}].push_back(i);
  }
  std::vector<Bag> bags;
  bags.reserve(groups.size());
  for (auto& [key, indices] : groups) {
    bags.push_back({{std::get<0>(key), std::get<1>(key)}, std::get<2>(key), std::move(indices)});
  }
  return bags;
}

}  // namespace relx
