#pragma once

// Mini-batch SGD over bags, adversarial input perturbation, and the three-stage
// leveled schedule.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "relx/error.hpp"
#include "relx/model.hpp"
#include "relx/numerics.hpp"

namespace relx {

enum class TrainMode { Att, AttAdv, MaxAdv, LattadvAtt, LattadvMax };

inline std::string_view to_string(TrainMode m) {
  switch (m) {
    case TrainMode::Att: return "att";
    case TrainMode::AttAdv: return "att-adv";
    case TrainMode::MaxAdv: return "max-adv";
    case TrainMode::LattadvAtt: return "lattadv-att";
    case TrainMode::LattadvMax: return "lattadv-max";
  }
  return "?";
}

inline std::optional<TrainMode> parse_train_mode(std::string_view text) {
  for (auto m : {TrainMode::Att, TrainMode::AttAdv, TrainMode::MaxAdv, TrainMode::LattadvAtt, TrainMode::LattadvMax})
    if (to_string(m) == text) return m;
  return std::nullopt;
}

struct TrainConfig {
  double learning_rate = 0.5;
  std::size_t batch_size = 160;  // bags per batch
  std::size_t max_epochs = 60;
  /// Per-stage epoch count for leveled modes; max_epochs when unset.
  std::optional<std::size_t> stage_epochs;
  double weight_decay = 1e-5;
  double dropout_rate = 0.5;
  double epsilon = 0.01;
  std::uint64_t seed = 1;
  TrainMode mode = TrainMode::LattadvAtt;

  void validate() const {
    if (!(learning_rate >= 0.0)) throw DomainError("learning rate must be non-negative");
    if (batch_size == 0) throw DomainError("batch size must be positive");
    if (!(weight_decay >= 0.0)) throw DomainError("weight decay must be non-negative");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw DomainError("dropout rate must lie in [0, 1)");
    if (!(epsilon >= 0.0)) throw DomainError("epsilon must be non-negative");
  }

  std::size_t epochs_per_stage() const { return stage_epochs.value_or(max_epochs); }
};

template <std::floating_point Real>
struct StageResult {
  std::size_t stage_index = 1;
  Aggregation aggregation = Aggregation::Attention;
  bool perturbed = false;
  std::vector<double> epoch_losses;
  std::vector<Parameter<Real>> checkpoint;
};

template <std::floating_point Real>
std::vector<Parameter<Real>> snapshot(const PcnnModel<Real>& model) {
  std::vector<Parameter<Real>> out;
  for (const auto* p : model.parameters()) out.push_back(*p);
  return out;
}

template <std::floating_point Real>
void restore(PcnnModel<Real>& model, const std::vector<Parameter<Real>>& saved) {
  auto params = model.parameters();
  if (params.size() != saved.size()) throw ContractViolation("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->value.shape() != saved[i].value.shape())
      throw ContractViolation("checkpoint shape mismatch for " + params[i]->name);
    params[i]->value = saved[i].value;
    params[i]->zero_grad();
  }
}

/// Per-sentence perturbations of the word-embedding inputs of a batch.
template <std::floating_point Real>
struct Perturbation {
  std::vector<std::vector<Tensor<Real>>> per_bag;  // [bag][sentence] T x word_dim
  double norm = 0.0;
};

/// Dropout masks for one batch, [bag][sentence]; empty when dropout is off.
template <std::floating_point Real>
std::vector<std::vector<std::vector<Real>>> draw_masks(std::span<const IndexedBag* const> batch, std::size_t dim,
                                                       double rate, Rng& rng) {
  std::vector<std::vector<std::vector<Real>>> masks(batch.size());
  if (rate <= 0.0) return masks;
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (std::size_t i = 0; i < batch[b]->sentences.size(); ++i)
      masks[b].push_back(make_dropout_mask<Real>(dim, rate, rng));
  return masks;
}

/// e_adv = epsilon * g / ||g||, g the gradient of the clean batch loss with respect to
/// the word-embedding inputs and ||g|| the norm over every word of every sentence.
/// Parameters are held fixed.
template <std::floating_point Real>
Perturbation<Real> adversarial_perturbation(PcnnModel<Real>& model, std::span<const IndexedBag* const> batch,
                                            Aggregation aggregation, double epsilon,
                                            const std::vector<std::vector<std::vector<Real>>>* masks = nullptr) {
  if (batch.empty()) throw ContractViolation("adversarial perturbation of an empty batch");
  Perturbation<Real> out;
  out.per_bag.resize(batch.size());
  double squared = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    BagPass<Real> pass;
    pass.accumulate_parameters = false;
    pass.word_input_gradients = &out.per_bag[b];
    if (masks && !(*masks)[b].empty()) pass.masks = &(*masks)[b];
    model.bag_loss(*batch[b], aggregation, pass);
    for (const auto& g : out.per_bag[b])
      for (Real v : g.values()) squared += static_cast<double>(v) * static_cast<double>(v);
  }
  const double g_norm = std::sqrt(squared);
  if (g_norm == 0.0) {
    warn("zero embedding gradient; perturbation is zero");
    for (auto& bag : out.per_bag)
      for (auto& g : bag) g.fill(Real(0));
    return out;
  }
  const double scale = epsilon / g_norm;
  double out_sq = 0.0;
  for (auto& bag : out.per_bag) {
    for (auto& g : bag) {
      for (auto& v : g.values()) {
        v = static_cast<Real>(scale * static_cast<double>(v));
        out_sq += static_cast<double>(v) * static_cast<double>(v);
      }
    }
  }
  out.norm = std::sqrt(out_sq);
  return out;
}

/// p <- p * (1 - lr * decay) - (lr / n) * grad, with grad summed over n bags.
template <std::floating_point Real>
void sgd_step(PcnnModel<Real>& model, double learning_rate, double weight_decay, std::size_t batch_bags) {
  const Real keep = static_cast<Real>(1.0 - learning_rate * weight_decay);
  const Real step = static_cast<Real>(learning_rate / static_cast<double>(batch_bags));
  for (auto* p : model.parameters()) {
    auto v = p->value.values();
    auto g = p->gradient.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = v[i] * keep - step * g[i];
  }
}

/// Runs `epochs` epochs of mini-batch SGD on the model in place. With `perturbed` the
/// loss is taken at inputs shifted by a fresh adversarial perturbation per batch.
template <std::floating_point Real>
StageResult<Real> train_stage(PcnnModel<Real>& model, std::span<const IndexedBag> data, const TrainConfig& config,
                              Aggregation aggregation, bool perturbed, std::size_t stage_index, std::size_t epochs) {
  config.validate();
  StageResult<Real> result{stage_index, aggregation, perturbed, {}, {}};
  const std::size_t dim = model.config().sentence_dim();
  const double rate = model.config().dropout_rate;
  Rng dropout_rng(mix_seed(config.seed, 0x5eed0000ULL + stage_index));

  std::vector<std::size_t> order(data.size());
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(mix_seed(config.seed, epoch));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::vector<const IndexedBag*> batch;
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&data[order[i]]);
      const auto masks = draw_masks<Real>(batch, dim, rate, dropout_rng);

      Perturbation<Real> shift;
      if (perturbed) shift = adversarial_perturbation<Real>(model, batch, aggregation, config.epsilon, &masks);

      model.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t b = 0; b < batch.size(); ++b) {
        BagPass<Real> pass;
        if (!masks[b].empty()) pass.masks = &masks[b];
        if (perturbed) pass.word_shifts = &shift.per_bag[b];
        batch_loss += static_cast<double>(model.bag_loss(*batch[b], aggregation, pass));
      }
      if (!std::isfinite(batch_loss))
        throw NumericError("non-finite loss in stage " + std::to_string(stage_index) + ", epoch " +
                           std::to_string(epoch) + ", batch " + std::to_string(batch_index));
      sgd_step(model, config.learning_rate, config.weight_decay, batch.size());
      epoch_loss += batch_loss;
    }
    result.epoch_losses.push_back(data.empty() ? 0.0 : epoch_loss / static_cast<double>(data.size()));
  }
  result.checkpoint = snapshot(model);
  return result;
}

/// Three chained stages: clean attention, then two perturbed stages each warm-started
/// from its predecessor. Stage 2 uses the maximum selector in LattadvMax mode.
template <std::floating_point Real>
std::vector<StageResult<Real>> train_leveled(PcnnModel<Real>& model, std::span<const IndexedBag> data,
                                             const TrainConfig& config) {
  if (config.mode != TrainMode::LattadvAtt && config.mode != TrainMode::LattadvMax)
    throw ContractViolation("leveled training needs a lattadv mode");
  const auto epochs = config.epochs_per_stage();
  const auto second = config.mode == TrainMode::LattadvMax ? Aggregation::Maximum : Aggregation::Attention;
  std::vector<StageResult<Real>> stages;
  stages.push_back(train_stage(model, data, config, Aggregation::Attention, false, 1, epochs));
  restore(model, stages.back().checkpoint);
  stages.push_back(train_stage(model, data, config, second, true, 2, epochs));
  restore(model, stages.back().checkpoint);
  stages.push_back(train_stage(model, data, config, Aggregation::Attention, true, 3, epochs));
  return stages;
}

/// Initializes the model from `config.seed` and trains it per `config.mode`.
template <std::floating_point Real>
std::vector<StageResult<Real>> train(PcnnModel<Real>& model, std::span<const IndexedBag> data,
                                     const TrainConfig& config, bool initialize = true) {
  config.validate();
  if (initialize) {
    Rng init_rng(config.seed);
    model.initialize(init_rng);
  }
  switch (config.mode) {
    case TrainMode::Att:
      return {train_stage(model, data, config, Aggregation::Attention, false, 1, config.max_epochs)};
    case TrainMode::AttAdv:
      return {train_stage(model, data, config, Aggregation::Attention, true, 1, config.max_epochs)};
    case TrainMode::MaxAdv:
      return {train_stage(model, data, config, Aggregation::Maximum, true, 1, config.max_epochs)};
    case TrainMode::LattadvAtt:
    case TrainMode::LattadvMax: return train_leveled(model, data, config);
  }
  return {};
}

/// Aggregation used to score a model trained in `mode`.
inline Aggregation inference_aggregation(TrainMode mode) {
  return mode == TrainMode::MaxAdv ? Aggregation::Maximum : Aggregation::Attention;
}

// ---------------------------------------------------------------------------

struct Prediction {
  std::pair<std::string, std::string> entity_pair;
  std::string relation;
  double score = 0.0;

  bool operator==(const Prediction&) const = default;
};

/// Ranking order: score desc, then entity pair, then relation.
inline bool prediction_order_less(const Prediction& a, const Prediction& b) {
  if (a.score != b.score) return a.score > b.score;
  return std::tie(a.entity_pair, a.relation) < std::tie(b.entity_pair, b.relation);
}

/// Scores every named non-NA relation for every bag and ranks the results.
template <std::floating_point Real>
std::vector<Prediction> predict(const PcnnModel<Real>& model, const RelationIndex& relations,
                                std::span<const IndexedBag> bags, Aggregation aggregation) {
  std::vector<Prediction> out;
  for (const auto& bag : bags) {
    const auto scores = model.relation_scores(bag, aggregation);
    for (std::size_t r = 0; r < relations.size() && r < scores.size(); ++r) {
      if (relations.name(r) == kNaLabel) continue;
      out.push_back({bag.entity_pair, relations.name(r), static_cast<double>(scores[r])});
    }
  }
  std::sort(out.begin(), out.end(), prediction_order_less);
  return out;
}

}  // namespace relx
