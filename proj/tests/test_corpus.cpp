#include <algorithm>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "relx/corpus.hpp"

using namespace relx;

namespace {

SentenceInstance make_sentence(std::vector<std::string> tokens, std::string head_id, std::string tail_id,
                               std::string relation) {
  SentenceInstance s;
  s.tokens = std::move(tokens);
  s.mentions = {{s.tokens[0], head_id, EntityType::Person, 0, 1},
                {s.tokens.back(), tail_id, EntityType::Location, s.tokens.size() - 1, s.tokens.size()}};
  s.head = 0;
  s.tail = 1;
  s.relation_label = std::move(relation);
  return s;
}

SentenceInstance words_only(std::vector<std::string> tokens) {
  SentenceInstance s;
  s.tokens = std::move(tokens);
  return s;
}

}  // namespace

TEST(Corpus, ParsesPersonCompanyRecord) {
  std::istringstream in(
      R"({"tokens":["danay","works","at","eleftherotypia"],"mentions":[{"name":"danay","id":"m.0dan05","type":"PERSON","start":0,"end":1},{"name":"eleftherotypia","id":"m.0ele14","type":"ORGANIZATION","start":3,"end":4}],"head":0,"tail":1,"relation":"/business/person/company","provenance":"ORIGINAL"})"
      "\n");
  auto corpus = read_corpus(in);
  ASSERT_EQ(corpus.size(), 1u);
  const auto& s = corpus[0];
  ASSERT_EQ(s.mentions.size(), 2u);
  EXPECT_EQ(s.head_mention().surface_name, "danay");
  EXPECT_EQ(s.tail_mention().entity_type, EntityType::Organization);
  EXPECT_EQ(s.tail_mention().start, 3u);
  EXPECT_EQ(s.relation_label, "/business/person/company");
  EXPECT_EQ(s.provenance, Provenance::Original);
}

TEST(Corpus, EmptyFileIsEmptyCorpus) {
  std::istringstream in("");
  EXPECT_TRUE(read_corpus(in).empty());
}

TEST(Corpus, SpanPastEndNamesLineAndField) {
  std::istringstream in(
      "{\"tokens\":[\"a\"],\"relation\":\"NA\"}\n"
      "{\"tokens\":[\"a\",\"b\"],\"mentions\":[{\"name\":\"a\",\"id\":\"x\",\"type\":\"PERSON\",\"start\":1,\"end\":5}]}\n");
  try {
    read_corpus(in);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.field(), "mentions[0].end");
  }
}

TEST(Corpus, RejectsBadRecords) {
  EXPECT_THROW(parse_sentence(R"({"tokens":[]})"), ParseError);
  EXPECT_THROW(parse_sentence(R"({"tokens":["a"],"mentions":[{"name":"a","id":"x","type":"ANIMAL","start":0,"end":1}]})"),
               ParseError);
  EXPECT_THROW(parse_sentence(R"({"tokens":["a","b"],"relation":"/r"})"), ParseError);
  EXPECT_THROW(parse_sentence(
                   R"({"tokens":["a","b"],"mentions":[{"name":"a","id":"x","type":"PERSON","start":0,"end":1}],"head":0,"tail":0,"relation":"/r"})"),
               ParseError);
  EXPECT_THROW(parse_sentence("not json"), ParseError);
  EXPECT_THROW(parse_sentence(R"({"tokens":["a"],"provenance":"COPIED"})"), ParseError);
}

TEST(Corpus, RoundTripIsExact) {
  std::vector<SentenceInstance> corpus{make_sentence({"ann", "lives", "in", "rome"}, "e1", "e2", "/people/person/place_lived"),
                                       words_only({"nothing", "here"})};
  corpus[1].provenance = Provenance::Generated;
  std::stringstream buf;
  write_corpus(buf, corpus);
  const auto again = read_corpus(buf);
  ASSERT_EQ(again.size(), corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    EXPECT_EQ(again[i].tokens, corpus[i].tokens);
    EXPECT_EQ(again[i].mentions, corpus[i].mentions);
    EXPECT_EQ(again[i].head, corpus[i].head);
    EXPECT_EQ(again[i].tail, corpus[i].tail);
    EXPECT_EQ(again[i].relation_label, corpus[i].relation_label);
    EXPECT_EQ(again[i].provenance, corpus[i].provenance);
  }
  std::stringstream second;
  write_corpus(second, again);
  std::stringstream first;
  write_corpus(first, corpus);
  EXPECT_EQ(first.str(), second.str());
}

TEST(Vocabulary, FrequencyThreshold) {
  std::vector<SentenceInstance> c{words_only({"the", "cat", "the"}), words_only({"the", "the", "cat", "the"})};
  auto v = build_vocabulary(c, 3);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v.word(0), "the");
  EXPECT_EQ(v.frequency(0), 5u);
  EXPECT_EQ(build_vocabulary(c, 1).size(), 2u);
  EXPECT_THROW(build_vocabulary(c, 0), DomainError);
}

TEST(Vocabulary, TiesBrokenLexicographically) {
  std::vector<SentenceInstance> c{words_only({"zebra", "apple", "mango", "mango"})};
  auto v = build_vocabulary(c, 1);
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v.word(0), "mango");
  EXPECT_EQ(v.word(1), "apple");
  EXPECT_EQ(v.word(2), "zebra");
}

TEST(Vocabulary, LowercasesAndHonorsStopwords) {
  std::vector<SentenceInstance> c{words_only({"The", "the", "Cat"})};
  auto v = build_vocabulary(c, 1, {"the"});
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v.word(0), "cat");
}

TEST(Vocabulary, OrderInsensitiveAndIdempotent) {
  std::mt19937 rng(3);
  std::vector<SentenceInstance> c;
  const std::vector<std::string> pool{"a", "b", "c", "d", "e", "f", "g"};
  for (int i = 0; i < 40; ++i) {
    std::vector<std::string> t;
    for (int j = 0; j < 5; ++j) t.push_back(pool[rng() % pool.size()]);
    c.push_back(words_only(t));
  }
  const auto v1 = build_vocabulary(c, 2);
  for (int rep = 0; rep < 5; ++rep) {
    std::shuffle(c.begin(), c.end(), rng);
    EXPECT_EQ(build_vocabulary(c, 2), v1);
  }
  for (Item i = 0; i < v1.size(); ++i) EXPECT_GE(v1.frequency(i), 2u);
}

TEST(Vocabulary, FileRoundTrip) {
  auto v = build_vocabulary({words_only({"x", "y", "y"})}, 1);
  std::stringstream buf;
  write_vocabulary(buf, v);
  EXPECT_EQ(buf.str(), "y\t0\t2\nx\t1\t1\n");
  EXPECT_EQ(read_vocabulary(buf), v);
  std::istringstream gap("a\t0\t3\nb\t2\t1\n");
  EXPECT_THROW(read_vocabulary(gap), ParseError);
}

TEST(Transactions, DedupeFilterAndSkip) {
  Vocabulary v({{"a", 2}, {"b", 1}}, 1);
  auto db = to_transactions({words_only({"a", "b", "a", "c"}), words_only({"c", "d"}), words_only({"B"})}, v);
  ASSERT_EQ(db.size(), 2u);
  EXPECT_EQ(db[0].items, (Itemset{0, 1}));
  EXPECT_EQ(db[0].source, 0u);
  EXPECT_EQ(db[1].items, (Itemset{1}));
  EXPECT_EQ(db[1].source, 2u);
}

TEST(Transactions, EightSentenceHandMapping) {
  const std::vector<std::vector<std::string>> text{
      {"ann", "met", "bob"},  {"bob", "met", "ann", "again"}, {"rain", "today"}, {"ann", "and", "bob"},
      {"met", "met", "met"},  {"nobody", "here"},             {"bob"},           {"ann", "met", "carl"}};
  std::vector<SentenceInstance> c;
  for (const auto& t : text) c.push_back(words_only(t));
  const auto v = build_vocabulary(c, 2);
  // counts: met 6, ann 4, bob 4 -> ids met=0, ann=1, bob=2
  ASSERT_EQ(v.size(), 3u);
  EXPECT_EQ(v.word(0), "met");
  EXPECT_EQ(v.word(1), "ann");
  EXPECT_EQ(v.word(2), "bob");
  const auto db = to_transactions(c, v);
  std::vector<std::pair<std::size_t, Itemset>> got;
  for (const auto& t : db) got.emplace_back(t.source, t.items);
  const std::vector<std::pair<std::size_t, Itemset>> want{
      {0, {0, 1, 2}}, {1, {0, 1, 2}}, {3, {1, 2}}, {4, {0}}, {6, {2}}, {7, {0, 1}}};
  EXPECT_EQ(got, want);
  for (const auto& t : db) EXPECT_TRUE(std::is_sorted(t.items.begin(), t.items.end()));
}

TEST(Bags, GroupsByPairAndLabel) {
  std::vector<SentenceInstance> c{
      make_sentence({"a", "x", "b"}, "e1", "e2", "/r1"), make_sentence({"a", "y", "b"}, "e3", "e4", "/r2"),
      make_sentence({"a", "z", "b"}, "e1", "e2", "/r1"), make_sentence({"a", "w", "b"}, "e1", "e2", "NA"),
      words_only({"no", "pair"}),                       make_sentence({"a", "v", "b"}, "e3", "e4", "/r2")};
  const auto bags = group_bags(c);
  ASSERT_EQ(bags.size(), 3u);
  EXPECT_EQ(bags[0], (Bag{{"e1", "e2"}, "/r1", {0, 2}}));
  EXPECT_EQ(bags[1], (Bag{{"e1", "e2"}, "NA", {3}}));
  EXPECT_EQ(bags[2], (Bag{{"e3", "e4"}, "/r2", {1, 5}}));
  std::size_t total = 0;
  for (const auto& b : bags) {
    total += b.sentence_indices.size();
    for (auto i : b.sentence_indices) {
      EXPECT_EQ(c[i].head_mention().entity_id, b.entity_pair.first);
      EXPECT_EQ(c[i].tail_mention().entity_id, b.entity_pair.second);
    }
  }
  EXPECT_EQ(total, 5u);
}

TEST(Text, Helpers) {
  EXPECT_EQ(lowercase("DaNay"), "danay");
  EXPECT_EQ(split_words("  new  york "), (std::vector<std::string>{"new", "york"}));
  EXPECT_EQ(join_words({"a", "b"}), "a b");
}
