#pragma once

// Piecewise convolutional sentence encoder with bag-level selective attention or a
// maximum selector, followed by a softmax relation classifier. Forward and backward
// passes are written out by hand for this fixed topology.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "relx/corpus.hpp"
#include "relx/error.hpp"
#include "relx/numerics.hpp"

namespace relx {

struct EncoderConfig {
  std::size_t word_dim = 50;
  std::size_t position_dim = 5;
  std::size_t filters = 230;
  std::size_t window = 3;
  std::size_t max_relations = 53;
  double dropout_rate = 0.5;
  std::size_t max_length = 120;
  std::size_t position_clip = 60;
  double init_scale = 0.1;

  std::size_t input_dim() const { return word_dim + 2 * position_dim; }
  std::size_t sentence_dim() const { return 3 * filters; }
  std::size_t position_rows() const { return 2 * position_clip + 1; }

  void validate() const {
    if (word_dim == 0 || position_dim == 0 || filters == 0 || window == 0 || max_relations == 0 || max_length == 0)
      throw DomainError("encoder dimensions must be positive");
    if (window % 2 == 0) throw DomainError("convolution window must be odd");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw DomainError("dropout rate must lie in [0, 1)");
  }
};

inline nlohmann::json to_json(const EncoderConfig& c) {
  return {{"word_dim", c.word_dim},         {"position_dim", c.position_dim}, {"filters", c.filters},
          {"window", c.window},             {"max_relations", c.max_relations}, {"dropout_rate", c.dropout_rate},
          {"max_length", c.max_length},     {"position_clip", c.position_clip}, {"init_scale", c.init_scale}};
}

inline EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.word_dim = j.at("word_dim").get<std::size_t>();
  c.position_dim = j.at("position_dim").get<std::size_t>();
  c.filters = j.at("filters").get<std::size_t>();
  c.window = j.at("window").get<std::size_t>();
  c.max_relations = j.at("max_relations").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.max_length = j.at("max_length").get<std::size_t>();
  c.position_clip = j.at("position_clip").get<std::size_t>();
  c.init_scale = j.at("init_scale").get<double>();
  c.validate();
  return c;
}

enum class Aggregation { Attention, Maximum };

inline std::string_view to_string(Aggregation a) { return a == Aggregation::Attention ? "attention" : "maximum"; }

/// Relation label -> class index. "NA" is always class 0; other labels follow in
/// lexicographic order.
class RelationIndex {
 public:
  RelationIndex() : names_{std::string(kNaLabel)} {}

  explicit RelationIndex(const std::vector<std::string>& labels) : RelationIndex() {
    std::vector<std::string> sorted;
    for (const auto& l : labels)
      if (l != kNaLabel) sorted.push_back(l);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    names_.insert(names_.end(), sorted.begin(), sorted.end());
  }

  std::optional<std::size_t> find(std::string_view label) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == label) return i;
    return std::nullopt;
  }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
};

struct IndexedSentence {
  std::vector<std::size_t> words;  // embedding rows
  std::size_t head_pos = 0;
  std::size_t tail_pos = 0;
};

struct IndexedBag {
  std::pair<std::string, std::string> entity_pair;
  std::size_t label = 0;
  std::vector<IndexedSentence> sentences;
};

/// Maps tokens to embedding rows (vocabulary item, or the UNK row = vocab.size()) and
/// records the first token of each entity. Long sentences are cut at max_length.
inline IndexedSentence index_sentence(const SentenceInstance& s, const Vocabulary& vocab, const EncoderConfig& config) {
  if (!s.has_pair()) throw ContractViolation("sentence has no head/tail pair to encode");
  IndexedSentence out;
  std::size_t length = s.tokens.size();
  if (length > config.max_length) {
    warn("sentence of " + std::to_string(length) + " tokens truncated to " + std::to_string(config.max_length));
    length = config.max_length;
  }
  out.words.reserve(length);
  for (std::size_t t = 0; t < length; ++t) {
    auto item = vocab.find(lowercase(s.tokens[t]));
    out.words.push_back(item ? *item : vocab.size());
  }
  out.head_pos = std::min(s.head_mention().start, length - 1);
  out.tail_pos = std::min(s.tail_mention().start, length - 1);
  return out;
}

/// Training bags: one per (head, tail, relation). Labels missing from `relations` are an error.
inline std::vector<IndexedBag> index_bags(const std::vector<SentenceInstance>& instances, const Vocabulary& vocab,
                                          const RelationIndex& relations, const EncoderConfig& config) {
  std::vector<IndexedBag> out;
  for (const auto& bag : group_bags(instances)) {
    auto label = relations.find(bag.relation_label);
    if (!label) throw Error("relation '" + bag.relation_label + "' is not in the relation index");
    IndexedBag ib{bag.entity_pair, *label, {}};
    for (auto i : bag.sentence_indices) ib.sentences.push_back(index_sentence(instances[i], vocab, config));
    out.push_back(std::move(ib));
  }
  return out;
}

/// Prediction bags: one per (head, tail) pair regardless of label, in pair order.
inline std::vector<IndexedBag> index_pair_bags(const std::vector<SentenceInstance>& instances, const Vocabulary& vocab,
                                               const EncoderConfig& config) {
  std::map<std::pair<std::string, std::string>, IndexedBag> groups;
  for (const auto& s : instances) {
    if (!s.has_pair()) continue;
    std::pair<std::string, std::string> key{s.head_mention().entity_id, s.tail_mention().entity_id};
    auto& bag = groups[key];
    bag.entity_pair = key;
    bag.sentences.push_back(index_sentence(s, vocab, config));
  }
  std::vector<IndexedBag> out;
  for (auto& [key, bag] : groups) out.push_back(std::move(bag));
  return out;
}

/// Forward-pass options and gradient sinks for one bag.
template <std::floating_point Real>
struct BagPass {
  /// Per-sentence dropout masks; null disables dropout.
  const std::vector<std::vector<Real>>* masks = nullptr;
  /// Per-sentence additive shifts of the word-embedding inputs (T x word_dim).
  const std::vector<Tensor<Real>>* word_shifts = nullptr;
  bool backward = true;
  bool accumulate_parameters = true;
  /// Receives dL/d(word-embedding inputs) per sentence when set.
  std::vector<Tensor<Real>>* word_input_gradients = nullptr;
};

template <std::floating_point Real>
struct AttentionResult {
  std::vector<Real> scores;   // tanh(s_i . q_r)
  std::vector<Real> weights;  // softmax of scores
  std::vector<Real> output;
};

template <std::floating_point Real>
class PcnnModel {
 public:
  /// Pre-activation value of an empty pooling segment; tanh maps it to the floor -1.
  static constexpr Real kEmptySegment = Real(-1e30);

  PcnnModel() = default;

  /// `word_rows` counts the UNK row.
  PcnnModel(EncoderConfig config, std::size_t word_rows) : config_(std::move(config)) {
    config_.validate();
    if (word_rows == 0) throw DomainError("embedding table needs at least the UNK row");
    const auto S = config_.sentence_dim();
    word_embedding = Parameter<Real>("word_embedding", {word_rows, config_.word_dim});
    head_position = Parameter<Real>("head_position", {config_.position_rows(), config_.position_dim});
    tail_position = Parameter<Real>("tail_position", {config_.position_rows(), config_.position_dim});
    filters = Parameter<Real>("filters", {config_.filters, config_.window * config_.input_dim()});
    relation_queries = Parameter<Real>("relation_queries", {config_.max_relations, S});
    relation_matrix = Parameter<Real>("relation_matrix", {config_.max_relations, S});
    relation_bias = Parameter<Real>("relation_bias", {config_.max_relations});
  }

  Parameter<Real> word_embedding;
  Parameter<Real> head_position;
  Parameter<Real> tail_position;
  Parameter<Real> filters;
  Parameter<Real> relation_queries;
  Parameter<Real> relation_matrix;
  Parameter<Real> relation_bias;

  const EncoderConfig& config() const { return config_; }
  std::size_t word_rows() const { return word_embedding.value.rows(); }

  std::vector<Parameter<Real>*> parameters() {
    return {&word_embedding, &head_position, &tail_position, &filters,
            &relation_queries, &relation_matrix, &relation_bias};
  }
  std::vector<const Parameter<Real>*> parameters() const {
    return {&word_embedding, &head_position, &tail_position, &filters,
            &relation_queries, &relation_matrix, &relation_bias};
  }

  void initialize(Rng& rng) {
    for (auto* p : parameters()) {
      fill_uniform(p->value, rng, config_.init_scale);
      p->zero_grad();
    }
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  /// Overwrites embedding rows of words present in `vectors`; returns how many matched.
  std::size_t load_pretrained(const PretrainedVectors& vectors, const std::vector<std::string>& words) {
    if (vectors.dim != config_.word_dim)
      throw Error("pretrained vectors have dimension " + std::to_string(vectors.dim) + ", model expects " +
                  std::to_string(config_.word_dim));
    std::size_t matched = 0;
    for (std::size_t row = 0; row < words.size() && row < word_rows(); ++row) {
      auto it = vectors.vectors.find(words[row]);
      if (it == vectors.vectors.end()) continue;
      for (std::size_t j = 0; j < config_.word_dim; ++j)
        word_embedding.value.at(row, j) = static_cast<Real>(it->second[j]);
      ++matched;
    }
    return matched;
  }

  // -------------------------------------------------------------------------
  // Sentence encoder

  struct Encoding {
    const IndexedSentence* sentence = nullptr;
    Tensor<Real> input;  // T x input_dim
    Tensor<Real> conv;   // T x filters
    PooledSegments<Real> pooled;
    std::vector<Real> activated;  // tanh(pooled)
    std::span<const Real> mask;
    std::vector<Real> output;  // activated * mask
  };

  std::size_t position_row(std::size_t t, std::size_t anchor) const {
    const auto clip = static_cast<std::ptrdiff_t>(config_.position_clip);
    auto offset = static_cast<std::ptrdiff_t>(t) - static_cast<std::ptrdiff_t>(anchor);
    offset = std::clamp(offset, -clip, clip);
    return static_cast<std::size_t>(offset + clip);
  }

  /// `word_shift`, when given, is added to the looked-up word embeddings.
  Encoding encode(const IndexedSentence& sentence, std::span<const Real> mask = {},
                  const Tensor<Real>* word_shift = nullptr) const {
    const std::size_t T = sentence.words.size();
    if (T == 0) throw ContractViolation("cannot encode an empty sentence");
    const std::size_t dw = config_.word_dim, dp = config_.position_dim;
    Encoding enc;
    enc.sentence = &sentence;
    enc.input = Tensor<Real>({T, config_.input_dim()});
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t w = sentence.words[t];
      if (w >= word_rows()) throw ContractViolation("word row " + std::to_string(w) + " outside the embedding table");
      auto x = enc.input.row(t);
      auto e = word_embedding.value.row(w);
      for (std::size_t j = 0; j < dw; ++j) x[j] = e[j] + (word_shift ? word_shift->at(t, j) : Real(0));
      auto ph = head_position.value.row(position_row(t, sentence.head_pos));
      auto pt = tail_position.value.row(position_row(t, sentence.tail_pos));
      for (std::size_t j = 0; j < dp; ++j) {
        x[dw + j] = ph[j];
        x[dw + dp + j] = pt[j];
      }
    }
    enc.conv = conv1d_window(enc.input, filters.value, config_.window);
    enc.pooled = piecewise_max_pool(enc.conv, sentence.head_pos, sentence.tail_pos, kEmptySegment);
    enc.activated.resize(enc.pooled.values.size());
    for (std::size_t i = 0; i < enc.activated.size(); ++i) enc.activated[i] = std::tanh(enc.pooled.values[i]);
    enc.mask = mask;
    enc.output = enc.activated;
    if (!mask.empty()) {
      if (mask.size() != enc.output.size()) throw ContractViolation("dropout mask size mismatch");
      for (std::size_t i = 0; i < enc.output.size(); ++i) enc.output[i] *= mask[i];
    }
    return enc;
  }

  /// Sentence vector with fresh dropout when training.
  std::vector<Real> encode(const IndexedSentence& sentence, Rng& rng, bool training) const {
    if (training && config_.dropout_rate > 0.0) {
      auto mask = make_dropout_mask<Real>(config_.sentence_dim(), config_.dropout_rate, rng);
      return encode(sentence, std::span<const Real>(mask)).output;
    }
    return encode(sentence).output;
  }

  void encode_backward(const Encoding& enc, std::span<const Real> d_output, bool accumulate_parameters,
                       Tensor<Real>* d_word_inputs) {
    const auto& sentence = *enc.sentence;
    const std::size_t T = sentence.words.size();
    const std::size_t dw = config_.word_dim, dp = config_.position_dim;
    std::vector<Real> d_pooled(d_output.begin(), d_output.end());
    for (std::size_t i = 0; i < d_pooled.size(); ++i) {
      if (!enc.mask.empty()) d_pooled[i] *= enc.mask[i];
      d_pooled[i] *= Real(1) - enc.activated[i] * enc.activated[i];
    }
    const auto d_conv = piecewise_max_pool_backward(enc.pooled, std::span<const Real>(d_pooled), T);
    Tensor<Real> d_input({T, config_.input_dim()});
    conv1d_window_backward(enc.input, filters.value, config_.window, d_conv, &d_input,
                           accumulate_parameters ? &filters.gradient : nullptr);
    if (d_word_inputs) {
      *d_word_inputs = Tensor<Real>({T, dw});
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < dw; ++j) d_word_inputs->at(t, j) = d_input.at(t, j);
    }
    if (!accumulate_parameters) return;
    for (std::size_t t = 0; t < T; ++t) {
      auto dx = d_input.row(t);
      auto de = word_embedding.gradient.row(sentence.words[t]);
      for (std::size_t j = 0; j < dw; ++j) de[j] += dx[j];
      auto dh = head_position.gradient.row(position_row(t, sentence.head_pos));
      auto dt = tail_position.gradient.row(position_row(t, sentence.tail_pos));
      for (std::size_t j = 0; j < dp; ++j) {
        dh[j] += dx[dw + j];
        dt[j] += dx[dw + dp + j];
      }
    }
  }

  // -------------------------------------------------------------------------
  // Bag aggregation and classification

  AttentionResult<Real> attend(const std::vector<std::vector<Real>>& bag, std::size_t relation) const {
    if (bag.empty()) throw ContractViolation("attention over an empty bag");
    check_relation(relation);
    auto q = relation_queries.value.row(relation);
    AttentionResult<Real> r;
    r.scores.resize(bag.size());
    for (std::size_t i = 0; i < bag.size(); ++i) r.scores[i] = std::tanh(dot(bag[i], q));
    r.weights = softmax(std::span<const Real>(r.scores));
    r.output.assign(bag.front().size(), Real(0));
    for (std::size_t i = 0; i < bag.size(); ++i)
      for (std::size_t j = 0; j < r.output.size(); ++j) r.output[j] += r.weights[i] * bag[i][j];
    return r;
  }

  std::vector<Real> logits(std::span<const Real> s) const {
    const std::size_t R = config_.max_relations;
    std::vector<Real> out(R);
    for (std::size_t r = 0; r < R; ++r) out[r] = dot(s, relation_matrix.value.row(r)) + relation_bias.value[r];
    return out;
  }

  /// softmax(A s + b)
  std::vector<Real> classify(std::span<const Real> s) const {
    auto z = logits(s);
    return softmax(std::span<const Real>(z));
  }

  /// Index of the member with the highest probability of `relation`; first index wins ties.
  std::size_t select_max(const std::vector<std::vector<Real>>& bag, std::size_t relation) const {
    if (bag.empty()) throw ContractViolation("maximum selector over an empty bag");
    check_relation(relation);
    std::size_t best = 0;
    Real best_p = -1;
    for (std::size_t i = 0; i < bag.size(); ++i) {
      const Real p = classify(std::span<const Real>(bag[i]))[relation];
      if (p > best_p) {
        best_p = p;
        best = i;
      }
    }
    return best;
  }

  /// -log P(label | bag); runs the backward pass too when `pass.backward` is set.
  Real bag_loss(const IndexedBag& bag, Aggregation aggregation, const BagPass<Real>& pass = {}) {
    const std::size_t n = bag.sentences.size();
    if (n == 0) throw ContractViolation("empty bag");
    check_relation(bag.label);
    std::vector<Encoding> encodings;
    encodings.reserve(n);
    std::vector<std::vector<Real>> vectors;
    vectors.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::span<const Real> mask;
      if (pass.masks) mask = (*pass.masks).at(i);
      const Tensor<Real>* shift = pass.word_shifts ? &(*pass.word_shifts).at(i) : nullptr;
      encodings.push_back(encode(bag.sentences[i], mask, shift));
      vectors.push_back(encodings.back().output);
    }

    AttentionResult<Real> att;
    std::size_t chosen = 0;
    std::vector<Real> aggregated;
    if (aggregation == Aggregation::Attention) {
      att = attend(vectors, bag.label);
      aggregated = att.output;
    } else {
      chosen = select_max(vectors, bag.label);
      aggregated = vectors[chosen];
    }

    const auto z = logits(std::span<const Real>(aggregated));
    const auto log_p = log_softmax(std::span<const Real>(z));
    Real loss = -log_p[bag.label];
    static const Real kMaxLoss = -std::log(Real(1e-12));
    if (loss > kMaxLoss) {
      warn("gold-label probability below 1e-12; loss clamped");
      loss = kMaxLoss;
    }
    if (!pass.backward) return loss;

    // dL/dz = softmax(z) - onehot(label)
    const std::size_t R = config_.max_relations, S = aggregated.size();
    std::vector<Real> dz(R);
    for (std::size_t r = 0; r < R; ++r) dz[r] = std::exp(log_p[r]) - (r == bag.label ? Real(1) : Real(0));
    std::vector<Real> d_agg(S, Real(0));
    for (std::size_t r = 0; r < R; ++r) {
      auto a = relation_matrix.value.row(r);
      for (std::size_t j = 0; j < S; ++j) d_agg[j] += dz[r] * a[j];
    }
    if (pass.accumulate_parameters) {
      for (std::size_t r = 0; r < R; ++r) {
        auto ga = relation_matrix.gradient.row(r);
        for (std::size_t j = 0; j < S; ++j) ga[j] += dz[r] * aggregated[j];
        relation_bias.gradient[r] += dz[r];
      }
    }

    std::vector<std::vector<Real>> d_vectors(n);
    if (aggregation == Aggregation::Attention) {
      std::vector<Real> d_weights(n);
      for (std::size_t i = 0; i < n; ++i) d_weights[i] = dot(vectors[i], std::span<const Real>(d_agg));
      const auto d_scores = softmax_backward(std::span<const Real>(att.weights), std::span<const Real>(d_weights));
      auto q = relation_queries.value.row(bag.label);
      auto gq = relation_queries.gradient.row(bag.label);
      for (std::size_t i = 0; i < n; ++i) {
        const Real d_e = d_scores[i] * (Real(1) - att.scores[i] * att.scores[i]);
        d_vectors[i].resize(S);
        for (std::size_t j = 0; j < S; ++j) d_vectors[i][j] = att.weights[i] * d_agg[j] + d_e * q[j];
        if (pass.accumulate_parameters)
          for (std::size_t j = 0; j < S; ++j) gq[j] += d_e * vectors[i][j];
      }
    } else {
      d_vectors[chosen] = d_agg;
    }

    if (pass.word_input_gradients) pass.word_input_gradients->assign(n, Tensor<Real>());
    for (std::size_t i = 0; i < n; ++i) {
      Tensor<Real>* d_words = pass.word_input_gradients ? &(*pass.word_input_gradients)[i] : nullptr;
      if (d_vectors[i].empty()) {
        // Unselected member: zero gradient everywhere.
        if (d_words) *d_words = Tensor<Real>({bag.sentences[i].words.size(), config_.word_dim});
        continue;
      }
      encode_backward(encodings[i], std::span<const Real>(d_vectors[i]), pass.accumulate_parameters, d_words);
    }
    return loss;
  }

  /// P(r | bag) for every class r. Attention re-aggregates the bag with each relation's
  /// own query; the maximum selector keeps the best member per relation.
  std::vector<Real> relation_scores(const IndexedBag& bag, Aggregation aggregation) const {
    std::vector<std::vector<Real>> vectors;
    for (const auto& s : bag.sentences) vectors.push_back(encode(s).output);
    if (vectors.empty()) throw ContractViolation("empty bag");
    const std::size_t R = config_.max_relations;
    std::vector<Real> out(R);
    if (aggregation == Aggregation::Attention) {
      for (std::size_t r = 0; r < R; ++r) out[r] = classify(std::span<const Real>(attend(vectors, r).output))[r];
    } else {
      std::vector<std::vector<Real>> probs;
      for (const auto& v : vectors) probs.push_back(classify(std::span<const Real>(v)));
      for (std::size_t r = 0; r < R; ++r) {
        Real best = 0;
        for (const auto& p : probs) best = std::max(best, p[r]);
        out[r] = best;
      }
    }
    return out;
  }

 private:
  static Real dot(std::span<const Real> a, std::span<const Real> b) {
    Real acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
  }
  static Real dot(const std::vector<Real>& a, std::span<const Real> b) { return dot(std::span<const Real>(a), b); }

  void check_relation(std::size_t r) const {
    if (r >= config_.max_relations)
      throw ContractViolation("relation index " + std::to_string(r) + " exceeds max_relations");
  }

  EncoderConfig config_;
};

/// Sum of bag losses without gradients. Dropout masks are drawn from `rng` when training.
template <std::floating_point Real>
Real batch_loss(PcnnModel<Real>& model, std::span<const IndexedBag> bags, Aggregation aggregation, Rng& rng,
                bool training) {
  Real total = 0;
  for (const auto& bag : bags) {
    std::vector<std::vector<Real>> masks;
    BagPass<Real> pass;
    pass.backward = false;
    if (training && model.config().dropout_rate > 0.0) {
      for (std::size_t i = 0; i < bag.sentences.size(); ++i)
        masks.push_back(make_dropout_mask<Real>(model.config().sentence_dim(), model.config().dropout_rate, rng));
      pass.masks = &masks;
    }
    total += model.bag_loss(bag, aggregation, pass);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Model checkpoint: parameters plus everything needed to index new sentences.

template <std::floating_point Real>
struct ModelBundle {
  PcnnModel<Real> model;
  RelationIndex relations;
  std::vector<std::string> words;  // embedding rows, UNK excluded
  Aggregation inference = Aggregation::Attention;

  Vocabulary vocabulary() const {
    std::vector<std::pair<std::string, std::size_t>> entries;
    for (const auto& w : words) entries.emplace_back(w, 0);
    return Vocabulary(std::move(entries), 1);
  }
};

inline constexpr std::string_view kCheckpointFormat = "relx-checkpoint/1";

template <std::floating_point Real>
std::string_view precision_name() {
  return sizeof(Real) == sizeof(float) ? "float32" : "float64";
}

template <std::floating_point Real>
nlohmann::json to_json(const ModelBundle<Real>& bundle) {
  const auto params = bundle.model.parameters();
  return {{"format", kCheckpointFormat},
          {"precision", precision_name<Real>()},
          {"config", to_json(bundle.model.config())},
          {"inference", to_string(bundle.inference)},
          {"relations", bundle.relations.names()},
          {"words", bundle.words},
          {"parameters", parameters_to_json<Real>(std::span<const Parameter<Real>* const>(params))}};
}

/// Reads the "precision" field without loading parameters.
inline std::string checkpoint_precision(const nlohmann::json& j) { return j.value("precision", "float64"); }

template <std::floating_point Real>
ModelBundle<Real> bundle_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != kCheckpointFormat) throw Error("not a relx checkpoint");
  if (checkpoint_precision(j) != precision_name<Real>())
    throw Error("checkpoint precision is " + checkpoint_precision(j) + ", expected " +
                std::string(precision_name<Real>()));
  ModelBundle<Real> b;
  auto config = encoder_config_from_json(j.at("config"));
  b.words = j.at("words").get<std::vector<std::string>>();
  b.relations = RelationIndex(j.at("relations").get<std::vector<std::string>>());
  if (b.relations.names() != j.at("relations").get<std::vector<std::string>>())
    throw Error("checkpoint relation list is not in canonical order");
  b.inference = j.at("inference").get<std::string>() == "maximum" ? Aggregation::Maximum : Aggregation::Attention;
  b.model = PcnnModel<Real>(config, b.words.size() + 1);
  auto params = b.model.parameters();
  parameters_from_json<Real>(j.at("parameters"), std::span<Parameter<Real>* const>(params));
  return b;
}

}  // namespace relx
