#pragma once

// Small hand-made inputs shared by the unit and acceptance tests.

#include <vector>

#include "relx/expand.hpp"
#include "relx/model.hpp"
#include "relx/numerics.hpp"

namespace fixture {

/// The worked code table: base {0,1,3,6} followed by its seven peers.
inline relx::CodeTable worked_table() {
  const std::vector<relx::Itemset> sets{{0, 1, 3, 6}, {0, 3, 5, 6}, {1, 2, 5, 6}, {2, 5, 6, 7},
                                        {0, 3, 5},    {0, 3, 7},    {2, 5, 7},    {4, 5, 7}};
  std::vector<relx::CodeTableEntry> entries;
  for (const auto& s : sets) entries.push_back({s, 1, 1, 0.0});
  return relx::CodeTable::from_entries(entries);
}

/// 0 = PERSON, 2 = LOCATION, 4 = ORGANIZATION.
inline relx::EntityLexicon worked_lexicon() {
  relx::EntityLexicon lex;
  lex.add(0, {"e0", "zero", relx::EntityType::Person});
  lex.add(2, {"e2", "two", relx::EntityType::Location});
  lex.add(4, {"e4", "four", relx::EntityType::Organization});
  return lex;
}

inline relx::EncoderConfig tiny_encoder() {
  relx::EncoderConfig c;
  c.word_dim = 4;
  c.position_dim = 2;
  c.filters = 3;
  c.window = 3;
  c.max_relations = 3;
  c.dropout_rate = 0.0;
  c.max_length = 20;
  c.position_clip = 6;
  c.init_scale = 0.5;
  return c;
}

inline relx::IndexedSentence sentence(std::vector<std::size_t> words, std::size_t head, std::size_t tail) {
  return {std::move(words), head, tail};
}

/// Two bags, three sentences in total, over a 10-row embedding table.
inline std::vector<relx::IndexedBag> two_bags() {
  return {
      {{"a", "b"}, 1, {sentence({1, 2, 3, 4, 5}, 1, 3), sentence({6, 2, 7, 8, 9, 0}, 2, 4)}},
      {{"c", "d"}, 2, {sentence({3, 3, 5, 1, 9, 8, 2}, 0, 5)}},
  };
}

}  // namespace fixture
