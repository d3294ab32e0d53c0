#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "relx/expand.hpp"

using namespace relx;

namespace {

ExpandOptions cosine(std::size_t k, bool all = false) {
  ExpandOptions o;
  o.k = k;
  o.metric = SimilarityMetric::Cosine;
  o.all_tie_branches = all;
  return o;
}

std::set<Itemset> merged_sets(const std::vector<GeneratedInstance>& g) {
  std::set<Itemset> out;
  for (const auto& x : g) out.insert(x.merged_itemset);
  return out;
}

}  // namespace

TEST(Similarity, WorkedTableValues) {
  const Itemset base{0, 1, 3, 6};
  EXPECT_NEAR(similarity(base, {0, 3, 5, 6}, SimilarityMetric::Cosine), 0.75, 1e-12);
  EXPECT_NEAR(similarity(base, {1, 2, 5, 6}, SimilarityMetric::Cosine), 0.5, 1e-12);
  EXPECT_NEAR(similarity(base, {2, 5, 6, 7}, SimilarityMetric::Cosine), 0.25, 1e-12);
  EXPECT_NEAR(similarity(base, {0, 3, 5}, SimilarityMetric::Cosine), 0.57735, 1e-5);
  EXPECT_NEAR(similarity(base, {0, 3, 7}, SimilarityMetric::Cosine), 0.57735, 1e-5);
  EXPECT_EQ(similarity(base, {2, 5, 7}, SimilarityMetric::Cosine), 0.0);
  EXPECT_EQ(similarity(base, {4, 5, 7}, SimilarityMetric::Cosine), 0.0);
}

TEST(Similarity, JaccardAndErrors) {
  EXPECT_DOUBLE_EQ(similarity({0, 1, 3, 6}, {0, 3, 5, 6}, SimilarityMetric::Jaccard), 3.0 / 5.0);
  EXPECT_EQ(similarity({4}, {4}, SimilarityMetric::Jaccard), 1.0);
  EXPECT_THROW(similarity({}, {1}, SimilarityMetric::Cosine), DomainError);
  EXPECT_EQ(parse_metric("cosine"), SimilarityMetric::Cosine);
  EXPECT_FALSE(parse_metric("euclid"));
}

TEST(Similarity, SymmetricBoundedReflexive) {
  std::mt19937 rng(4);
  auto random_set = [&] {
    Itemset s;
    for (Item i = 0; i < 10; ++i)
      if (rng() % 2) s.push_back(i);
    if (s.empty()) s.push_back(static_cast<Item>(rng() % 10));
    return s;
  };
  for (int rep = 0; rep < 500; ++rep) {
    const auto a = random_set(), b = random_set();
    for (auto m : {SimilarityMetric::Cosine, SimilarityMetric::Jaccard}) {
      const double ab = similarity(a, b, m);
      EXPECT_EQ(ab, similarity(b, a, m));
      EXPECT_GE(ab, 0.0);
      EXPECT_LE(ab, 1.0 + 1e-15);
      EXPECT_NEAR(similarity(a, a, m), 1.0, 1e-15);
      if (a != b && m == SimilarityMetric::Jaccard) {
        EXPECT_LT(ab, 1.0);
      }
    }
  }
}

TEST(Classify, WorkedTableCases) {
  const auto lex = fixture::worked_lexicon();
  const auto t = default_templates();
  EXPECT_EQ(classify_itemset({0, 1, 2, 3}, lex, t), ItemsetClass::Ideal);
  EXPECT_EQ(classify_itemset({0, 4, 5}, lex, t), ItemsetClass::Ideal);
  EXPECT_EQ(classify_itemset({0, 5, 6}, lex, t), ItemsetClass::HalfIdeal);
  EXPECT_EQ(classify_itemset({4, 7}, lex, t), ItemsetClass::HalfIdeal);
  EXPECT_EQ(classify_itemset({1, 2}, lex, t), ItemsetClass::HalfIdeal);
  EXPECT_EQ(classify_itemset({1, 3, 5}, lex, t), ItemsetClass::NotIdeal);
}

TEST(Classify, SameTypePairIsNotIdeal) {
  EntityLexicon lex;
  lex.add(0, {"p1", "ann", EntityType::Person});
  lex.add(1, {"p2", "bob", EntityType::Person});
  EXPECT_EQ(classify_itemset({0, 1}, lex, default_templates()), ItemsetClass::HalfIdeal);
}

TEST(ExpandBase, WorkedTableDefaultBranch) {
  const auto ct = fixture::worked_table();
  const auto lex = fixture::worked_lexicon();
  const auto out = expand_base(0, ct, lex, default_templates(), cosine(3));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].merged_itemset, (Itemset{0, 1, 2, 3, 5, 6}));
  EXPECT_EQ(out[0].k_used, 3u);
  EXPECT_EQ(out[0].relation_label, "/people/person/place_lived");
  EXPECT_EQ(out[0].head.entity_id, "e0");
  EXPECT_EQ(out[0].tail.entity_id, "e2");
}

TEST(ExpandBase, WorkedTableAllTieBranches) {
  const auto ct = fixture::worked_table();
  const auto lex = fixture::worked_lexicon();
  const auto out = expand_base(0, ct, lex, default_templates(), cosine(3, true));
  EXPECT_EQ(merged_sets(out), (std::set<Itemset>{{0, 1, 2, 3, 5, 6}, {0, 1, 2, 3, 5, 6, 7}}));
  for (const auto& g : out) EXPECT_EQ(g.k_used, 3u);
}

TEST(ExpandBase, RanksGroupTies) {
  const auto ct = fixture::worked_table();
  const auto ranks = similarity_ranks(0, ct, SimilarityMetric::Cosine);
  ASSERT_EQ(ranks.size(), 5u);
  EXPECT_EQ(ranks[0], (std::vector<std::size_t>{1}));
  EXPECT_EQ(ranks[1], (std::vector<std::size_t>{4, 5}));
  EXPECT_EQ(ranks[2], (std::vector<std::size_t>{2}));
  EXPECT_EQ(ranks[3], (std::vector<std::size_t>{3}));
  EXPECT_EQ(ranks[4], (std::vector<std::size_t>{6, 7}));
}

TEST(ExpandBase, TrivialOutcomes) {
  const auto lex = fixture::worked_lexicon();
  const auto t = default_templates();
  auto ct = CodeTable::from_entries({{{4, 7}, 1, 1, 0.0}, {{1, 3, 5}, 1, 1, 0.0}, {{0, 2}, 1, 1, 0.0}});
  EXPECT_TRUE(expand_base(0, ct, lex, t, cosine(0)).empty());
  EXPECT_TRUE(expand_base(1, ct, lex, t, cosine(5)).empty());
  const auto ideal = expand_base(2, ct, lex, t, cosine(0));
  ASSERT_EQ(ideal.size(), 1u);
  EXPECT_EQ(ideal[0].k_used, 0u);
  // zero-similarity peers still count as extensions; {0,2} wins the tie group
  EXPECT_EQ(expand_base(0, ct, lex, t, cosine(1)).front().merged_itemset, (Itemset{0, 2, 4, 7}));

  // {4,5} is the nearest peer of {4,7} but adds no partner: k = 1 is skipped, k = 2 is not
  auto far = CodeTable::from_entries(
      {{{4, 7}, 1, 1, 0.0}, {{4, 5}, 1, 1, 0.0}, {{1, 3, 5}, 1, 1, 0.0}, {{0, 2}, 1, 1, 0.0}});
  EXPECT_TRUE(expand_base(0, far, lex, t, cosine(1)).empty());
  const auto two = expand_base(0, far, lex, t, cosine(2));
  ASSERT_FALSE(two.empty());
  EXPECT_EQ(two.front().merged_itemset, (Itemset{0, 2, 4, 5, 7}));
  EXPECT_EQ(two.front().k_used, 2u);
}

TEST(ExpandBase, OutputsAlwaysHoldAPairAndGrowWithK) {
  std::mt19937 rng(8);
  EntityLexicon lex;
  lex.add(0, {"p0", "ann", EntityType::Person});
  lex.add(1, {"l1", "rome", EntityType::Location});
  lex.add(2, {"o2", "acme", EntityType::Organization});
  lex.add(3, {"p3", "bob", EntityType::Person});
  const auto t = default_templates();
  for (int rep = 0; rep < 60; ++rep) {
    std::vector<CodeTableEntry> entries;
    for (int e = 0; e < 8; ++e) {
      Itemset s;
      for (Item i = 0; i < 9; ++i)
        if (rng() % 3 == 0) s.push_back(i);
      if (s.size() < 2) s = {static_cast<Item>(4 + rng() % 5), 9};
      entries.push_back({s, 1, 1, 0.0});
    }
    const auto ct = CodeTable::from_entries(entries);
    std::set<std::size_t> producing_prev;
    for (std::size_t k = 0; k <= 8; ++k) {
      std::set<std::size_t> producing;
      for (std::size_t b = 0; b < ct.size(); ++b) {
        for (bool all : {false, true}) {
          auto opt = cosine(k, all);
          opt.metric = rep % 2 ? SimilarityMetric::Jaccard : SimilarityMetric::Cosine;
          const auto out = expand_base(b, ct, lex, t, opt);
          for (const auto& g : out) {
            EXPECT_EQ(classify_itemset(g.merged_itemset, lex, t), ItemsetClass::Ideal);
            EXPECT_LE(g.k_used, k);
          }
          if (!all && !out.empty()) producing.insert(b);
        }
      }
      for (auto b : producing_prev) EXPECT_TRUE(producing.count(b)) << "base " << b << " lost at k=" << k;
      producing_prev = producing;
    }
  }
}

TEST(Instantiate, PersonCompanyRecord) {
  const auto tpl = default_templates()[2];
  const auto g = instantiate_template({"m.0dan05", "danay", EntityType::Person},
                                      {"m.0ele14", "eleftherotypia", EntityType::Organization}, tpl, {7, 8, 9});
  EXPECT_EQ(g.relation_label, "/business/person/company");
  EXPECT_EQ(g.template_sentence, "danay has organization eleftherotypia");
  const auto s = to_sentence(g);
  EXPECT_EQ(s.provenance, Provenance::Generated);
  EXPECT_EQ(s.tokens, (std::vector<std::string>{"danay", "has", "organization", "eleftherotypia"}));
  EXPECT_EQ(s.head_mention().start, 0u);
  EXPECT_EQ(s.tail_mention().start, 3u);
  EXPECT_NO_THROW(validate(s));
}

TEST(Instantiate, TemplatesAndMismatch) {
  const auto t = default_templates();
  EXPECT_EQ(t[0].relation_label, "/business/company/location");
  const auto g = instantiate_template({"o", "acme corp", EntityType::Organization}, {"l", "paris", EntityType::Location},
                                      t[0], {});
  EXPECT_EQ(g.template_sentence, "acme corp has location paris");
  EXPECT_EQ(g.head.end, 2u);
  EXPECT_EQ(g.tail.start, 4u);
  EXPECT_EQ(t[1].relation_label, "/people/person/place_lived");
  EXPECT_EQ(instantiate_template({"p", "ann", EntityType::Person}, {"l", "rome", EntityType::Location}, t[1], {})
                .template_sentence,
            "ann has location rome");
  EXPECT_THROW(instantiate_template({"p", "ann", EntityType::Person}, {"o", "acme", EntityType::Organization}, t[0], {}),
               ContractViolation);
}

TEST(ExpandDatabase, WorkedTableHandWalk) {
  const auto ct = fixture::worked_table();
  const auto lex = fixture::worked_lexicon();
  std::vector<SentenceInstance> input(2);
  input[0].tokens = {"x"};
  input[1].tokens = {"y"};
  const auto result = expand_database(input, ct, lex, default_templates(), cosine(3));
  // Hand walk, default branch. Entity-bearing bases: 0 (PER), 2 (LOC), 3 (LOC), 4 (PER),
  // 5 (PER), 6 (LOC), 7 (ORG). Every union that completes a pair names (e0,e2) as
  // place_lived, or (e0,e4) as person/company.
  std::set<std::tuple<std::string, std::string, std::string>> got;
  for (const auto& g : result.generated) got.emplace(g.head.entity_id, g.tail.entity_id, g.relation_label);
  EXPECT_TRUE(got.count({"e0", "e2", "/people/person/place_lived"}));
  EXPECT_EQ(result.instances.size(), input.size() + result.generated.size());
  for (std::size_t i = input.size(); i < result.instances.size(); ++i)
    EXPECT_EQ(result.instances[i].provenance, Provenance::Generated);
  // dedupe: identical (pair, relation, sentence) appears once
  std::set<std::tuple<std::string, std::string, std::string, std::string>> keys;
  for (const auto& g : result.generated)
    EXPECT_TRUE(keys.emplace(g.head.entity_id, g.tail.entity_id, g.relation_label, g.template_sentence).second);
  EXPECT_EQ(result.generated.front().base_index, 0u);
  EXPECT_EQ(result.generated.front().merged_itemset, (Itemset{0, 1, 2, 3, 5, 6}));
}

TEST(ExpandDatabase, NoEntitiesNoGrowth) {
  const auto ct = fixture::worked_table();
  std::vector<SentenceInstance> input(3);
  for (auto& s : input) s.tokens = {"w"};
  const auto result = expand_database(input, ct, EntityLexicon{}, default_templates(), cosine(7));
  EXPECT_EQ(result.instances.size(), 3u);
  EXPECT_TRUE(result.generated.empty());
}

TEST(ExpandDatabase, ReportFormat) {
  Vocabulary v({{"steijn", 3}, {"danay", 2}, {"eleftherotypia", 2}}, 1);
  auto g = instantiate_template({"m.0dan05", "danay", EntityType::Person},
                                {"m.0ele14", "eleftherotypia", EntityType::Organization}, default_templates()[2],
                                {0, 1, 2}, 4, 2);
  std::ostringstream out;
  write_expansion_report(out, {g}, v);
  EXPECT_EQ(out.str(),
            "#relation\tentity1.id\tentity1.name\tentity2.id\tentity2.name\tF*\tTP\tbase_index\tk_used\n"
            "/business/person/company\tm.0dan05\tdanay\tm.0ele14\teleftherotypia\tsteijn danay eleftherotypia\t"
            "danay has organization eleftherotypia\t4\t2\n");
}

TEST(Lexicon, BuiltFromMentions) {
  SentenceInstance s;
  s.tokens = {"Danay", "works", "at", "Eleftherotypia"};
  s.mentions = {{"Danay", "m.1", EntityType::Person, 0, 1}, {"Eleftherotypia", "m.2", EntityType::Organization, 3, 4}};
  s.head = 0;
  s.tail = 1;
  s.relation_label = "/business/person/company";
  const auto v = build_vocabulary({s}, 1);
  const auto lex = build_entity_lexicon({s}, v);
  EXPECT_EQ(lex.size(), 2u);
  ASSERT_NE(lex.find(*v.find("danay")), nullptr);
  EXPECT_EQ(lex.find(*v.find("danay"))->entity_id, "m.1");
  EXPECT_EQ(lex.find(*v.find("works")), nullptr);
}
