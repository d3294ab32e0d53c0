#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "relx/trainer.hpp"

using namespace relx;

namespace {

/// Separable toy data: relation 1 bags use words 1-4, relation 2 bags use words 5-8.
std::vector<IndexedBag> toy_data(std::size_t bags_per_class = 6) {
  std::vector<IndexedBag> out;
  Rng rng(77);
  for (std::size_t r = 1; r <= 2; ++r)
    for (std::size_t b = 0; b < bags_per_class; ++b) {
      IndexedBag bag{{"h" + std::to_string(r) + std::to_string(b), "t"}, r, {}};
      const std::size_t n = 1 + rng.below(3);
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::size_t> words;
        for (std::size_t t = 0; t < 6; ++t) words.push_back(r == 1 ? 1 + rng.below(4) : 5 + rng.below(4));
        words[0] = 9;
        bag.sentences.push_back(fixture::sentence(words, 1, 4));
      }
      out.push_back(bag);
    }
  return out;
}

TrainConfig quick_config(TrainMode mode) {
  TrainConfig c;
  c.learning_rate = 0.3;
  c.batch_size = 4;
  c.max_epochs = 3;
  c.weight_decay = 1e-5;
  c.epsilon = 0.05;
  c.seed = 5;
  c.mode = mode;
  return c;
}

PcnnModel<double> fresh(double dropout = 0.0) {
  auto cfg = fixture::tiny_encoder();
  cfg.dropout_rate = dropout;
  return PcnnModel<double>(cfg, 10);
}

std::vector<const IndexedBag*> pointers(const std::vector<IndexedBag>& bags) {
  std::vector<const IndexedBag*> out;
  for (const auto& b : bags) out.push_back(&b);
  return out;
}

bool same_parameters(const PcnnModel<double>& a, const PcnnModel<double>& b) {
  auto pa = a.parameters();
  auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (!(pa[i]->value == pb[i]->value)) return false;
  return true;
}

}  // namespace

TEST(TrainConfig, ModesAndValidation) {
  for (auto m : {TrainMode::Att, TrainMode::AttAdv, TrainMode::MaxAdv, TrainMode::LattadvAtt, TrainMode::LattadvMax})
    EXPECT_EQ(parse_train_mode(to_string(m)), m);
  EXPECT_FALSE(parse_train_mode("lattadv"));
  TrainConfig c;
  EXPECT_EQ(c.epochs_per_stage(), 60u);
  c.stage_epochs = 4;
  EXPECT_EQ(c.epochs_per_stage(), 4u);
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), DomainError);
  EXPECT_EQ(inference_aggregation(TrainMode::MaxAdv), Aggregation::Maximum);
  EXPECT_EQ(inference_aggregation(TrainMode::LattadvMax), Aggregation::Attention);
}

TEST(Adversarial, NormEqualsEpsilon) {
  auto m = fresh();
  Rng rng(1);
  m.initialize(rng);
  const auto data = toy_data();
  const auto batch = pointers(data);
  for (double eps : {0.001, 0.05, 1.0}) {
    for (auto agg : {Aggregation::Attention, Aggregation::Maximum}) {
      auto p = adversarial_perturbation<double>(m, batch, agg, eps);
      EXPECT_NEAR(p.norm, eps, 1e-9);
      ASSERT_EQ(p.per_bag.size(), data.size());
      for (std::size_t b = 0; b < data.size(); ++b) {
        ASSERT_EQ(p.per_bag[b].size(), data[b].sentences.size());
        EXPECT_EQ(p.per_bag[b][0].rows(), data[b].sentences[0].words.size());
      }
    }
  }
  for (auto* q : m.parameters())
    for (double g : q->gradient.values()) EXPECT_EQ(g, 0.0);
}

TEST(Adversarial, PerturbationIncreasesLoss) {
  auto m = fresh();
  Rng rng(2);
  m.initialize(rng);
  const auto data = toy_data();
  const auto batch = pointers(data);
  auto p = adversarial_perturbation<double>(m, batch, Aggregation::Attention, 0.01);
  double clean = 0, shifted = 0;
  for (std::size_t b = 0; b < data.size(); ++b) {
    BagPass<double> a;
    a.backward = false;
    clean += m.bag_loss(data[b], Aggregation::Attention, a);
    a.word_shifts = &p.per_bag[b];
    shifted += m.bag_loss(data[b], Aggregation::Attention, a);
  }
  EXPECT_GT(shifted, clean);
}

TEST(Adversarial, ZeroGradientWarnsAndReturnsZeros) {
  auto m = fresh();  // all-zero parameters: the word gradient vanishes
  const auto data = toy_data(1);
  const auto before = warning_count();
  auto p = adversarial_perturbation<double>(m, pointers(data), Aggregation::Attention, 0.1);
  EXPECT_GT(warning_count(), before);
  EXPECT_EQ(p.norm, 0.0);
  for (const auto& bag : p.per_bag)
    for (const auto& t : bag)
      for (double v : t.values()) EXPECT_EQ(v, 0.0);
}

TEST(Training, EpsilonZeroReproducesCleanTrajectory) {
  const auto data = toy_data();
  for (double dropout : {0.0, 0.5}) {
    auto clean = fresh(dropout);
    auto adv = fresh(dropout);
    auto cc = quick_config(TrainMode::Att);
    auto ca = quick_config(TrainMode::AttAdv);
    ca.epsilon = 0.0;
    const auto rc = train(clean, std::span<const IndexedBag>(data), cc);
    const auto ra = train(adv, std::span<const IndexedBag>(data), ca);
    EXPECT_TRUE(same_parameters(clean, adv));
    EXPECT_EQ(rc[0].epoch_losses, ra[0].epoch_losses);
  }
}

TEST(Training, DeterministicUnderSeed) {
  const auto data = toy_data();
  auto a = fresh(0.5), b = fresh(0.5), c = fresh(0.5);
  auto cfg = quick_config(TrainMode::LattadvAtt);
  cfg.stage_epochs = 2;
  train(a, std::span<const IndexedBag>(data), cfg);
  train(b, std::span<const IndexedBag>(data), cfg);
  cfg.seed = 6;
  train(c, std::span<const IndexedBag>(data), cfg);
  EXPECT_TRUE(same_parameters(a, b));
  EXPECT_FALSE(same_parameters(a, c));
}

TEST(Training, LossDecreasesAndModelSeparatesClasses) {
  const auto data = toy_data();
  auto m = fresh();
  auto cfg = quick_config(TrainMode::Att);
  cfg.max_epochs = 30;
  const auto r = train(m, std::span<const IndexedBag>(data), cfg);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_LT(r[0].epoch_losses.back(), r[0].epoch_losses.front());
  for (const auto& bag : data) {
    auto s = m.relation_scores(bag, Aggregation::Attention);
    const std::size_t other = bag.label == 1 ? 2 : 1;
    EXPECT_GT(s[bag.label], s[other]);
  }
}

TEST(Training, LeveledStagesChain) {
  const auto data = toy_data();
  for (auto mode : {TrainMode::LattadvAtt, TrainMode::LattadvMax}) {
    auto m = fresh(0.5);
    auto cfg = quick_config(mode);
    cfg.stage_epochs = 2;
    const auto stages = train(m, std::span<const IndexedBag>(data), cfg);
    ASSERT_EQ(stages.size(), 3u);
    EXPECT_FALSE(stages[0].perturbed);
    EXPECT_TRUE(stages[1].perturbed);
    EXPECT_TRUE(stages[2].perturbed);
    EXPECT_EQ(stages[0].aggregation, Aggregation::Attention);
    EXPECT_EQ(stages[1].aggregation, mode == TrainMode::LattadvMax ? Aggregation::Maximum : Aggregation::Attention);
    EXPECT_EQ(stages[2].aggregation, Aggregation::Attention);
    for (const auto& s : stages) EXPECT_EQ(s.epoch_losses.size(), 2u);

    // stage 2 warm-starts from stage 1: replaying it from the stage-1 snapshot matches
    auto replay = fresh(0.5);
    restore(replay, stages[0].checkpoint);
    auto s2 = train_stage(replay, std::span<const IndexedBag>(data), cfg, stages[1].aggregation, true, 2, 2);
    EXPECT_EQ(s2.epoch_losses, stages[1].epoch_losses);
  }
}

TEST(Training, SgdStepFormula) {
  auto m = fresh();
  m.word_embedding.value[0] = 2.0;
  m.word_embedding.gradient[0] = 4.0;
  sgd_step(m, 0.5, 0.1, 2);
  EXPECT_DOUBLE_EQ(m.word_embedding.value[0], 2.0 * (1 - 0.05) - 0.25 * 4.0);
}

TEST(Training, NonFiniteLossAborts) {
  auto data = toy_data(1);
  auto m = fresh();
  Rng rng(3);
  m.initialize(rng);
  auto cfg = quick_config(TrainMode::Att);
  cfg.learning_rate = 1e300;
  EXPECT_THROW(train(m, std::span<const IndexedBag>(data), cfg, false), NumericError);
}

TEST(Prediction, RankedAndSkipsNa) {
  const auto data = toy_data(2);
  auto m = fresh();
  Rng rng(4);
  m.initialize(rng);
  RelationIndex rel({"/one", "/two"});
  auto preds = predict(m, rel, std::span<const IndexedBag>(data), Aggregation::Attention);
  EXPECT_EQ(preds.size(), data.size() * 2);
  for (const auto& p : preds) EXPECT_NE(p.relation, "NA");
  EXPECT_TRUE(std::is_sorted(preds.begin(), preds.end(), prediction_order_less));
}
