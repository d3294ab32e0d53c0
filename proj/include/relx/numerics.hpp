#pragma once

// Dense row-major tensors and the forward/backward kernels of the PCNN encoder.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "relx/error.hpp"

namespace relx {

template <std::floating_point Real>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape, Real fill = Real(0)) : shape_(std::move(shape)) {
    values_.assign(count(shape_), fill);
  }

  Tensor(std::vector<std::size_t> shape, std::vector<Real> values) : shape_(std::move(shape)), values_(std::move(values)) {
    if (values_.size() != count(shape_))
      throw ContractViolation("tensor value count " + std::to_string(values_.size()) + " does not match shape");
    for (Real v : values_)
      if (!std::isfinite(v)) throw NumericError("non-finite tensor value");
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return shape_.empty() || shape_[0] == 0 ? 0 : values_.size() / shape_[0]; }

  Real& operator[](std::size_t i) { return values_[i]; }
  Real operator[](std::size_t i) const { return values_[i]; }
  Real& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  Real at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  std::span<Real> row(std::size_t r) { return {values_.data() + r * cols(), cols()}; }
  std::span<const Real> row(std::size_t r) const { return {values_.data() + r * cols(), cols()}; }
  std::span<Real> values() { return values_; }
  std::span<const Real> values() const { return values_; }
  Real* data() { return values_.data(); }
  const Real* data() const { return values_.data(); }

  void fill(Real v) { std::fill(values_.begin(), values_.end(), v); }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](Real v) { return std::isfinite(v); });
  }

  bool operator==(const Tensor&) const = default;

 private:
  static std::size_t count(const std::vector<std::size_t>& shape) {
    if (shape.empty()) return 0;
    std::size_t n = 1;
    for (auto e : shape) {
      if (e == 0) throw ContractViolation("tensor extents must be positive");
      n *= e;
    }
    return n;
  }

  std::vector<std::size_t> shape_;
  std::vector<Real> values_;
};

template <std::floating_point Real>
struct Parameter {
  std::string name;
  Tensor<Real> value;
  Tensor<Real> gradient;

  Parameter() = default;
  Parameter(std::string n, std::vector<std::size_t> shape)
      : name(std::move(n)), value(shape), gradient(std::move(shape)) {}

  void zero_grad() { gradient.fill(Real(0)); }
};

/// splitmix64 finalizer, for deriving independent seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seeded generator with platform-independent derived draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 1) : engine_(seed) {}

  /// Uniform in [0, 1) from the top 53 bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(engine_() % n); }
  double normal() {
    // Box-Muller; avoids the implementation-defined std::normal_distribution.
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

template <std::floating_point Real>
void fill_uniform(Tensor<Real>& t, Rng& rng, double scale) {
  for (auto& v : t.values()) v = static_cast<Real>(rng.uniform(-scale, scale));
}

// ---------------------------------------------------------------------------
// 1-D convolution over token positions, zero padded by (w-1)/2 on both sides.

template <std::floating_point Real>
Tensor<Real> conv1d_window(const Tensor<Real>& input, const Tensor<Real>& filters, std::size_t window) {
  const std::size_t T = input.rows(), d = input.cols(), F = filters.rows();
  if (window % 2 == 0) throw ContractViolation("convolution window must be odd");
  if (filters.cols() != window * d)
    throw ContractViolation("filter width " + std::to_string(filters.cols()) + " != window * input dim " +
                            std::to_string(window * d));
  const auto half = static_cast<std::ptrdiff_t>(window / 2);
  Tensor<Real> out({T, F});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      const Real* w = filters.data() + f * window * d;
      Real acc = 0;
      for (std::size_t k = 0; k < window; ++k) {
        const auto src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(k) - half;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
        const Real* x = input.data() + static_cast<std::size_t>(src) * d;
        const Real* wk = w + k * d;
        for (std::size_t j = 0; j < d; ++j) acc += wk[j] * x[j];
      }
      out.at(t, f) = acc;
    }
  }
  return out;
}

/// Accumulates d(loss)/d(input) and d(loss)/d(filters) given d(loss)/d(output).
template <std::floating_point Real>
void conv1d_window_backward(const Tensor<Real>& input, const Tensor<Real>& filters, std::size_t window,
                            const Tensor<Real>& d_output, Tensor<Real>* d_input, Tensor<Real>* d_filters) {
  const std::size_t T = input.rows(), d = input.cols(), F = filters.rows();
  const auto half = static_cast<std::ptrdiff_t>(window / 2);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      const Real g = d_output.at(t, f);
      if (g == Real(0)) continue;
      for (std::size_t k = 0; k < window; ++k) {
        const auto src = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(k) - half;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(T)) continue;
        const std::size_t row = static_cast<std::size_t>(src);
        const std::size_t offset = f * window * d + k * d;
        if (d_filters) {
          Real* dw = d_filters->data() + offset;
          const Real* x = input.data() + row * d;
          for (std::size_t j = 0; j < d; ++j) dw[j] += g * x[j];
        }
        if (d_input) {
          Real* dx = d_input->data() + row * d;
          const Real* w = filters.data() + offset;
          for (std::size_t j = 0; j < d; ++j) dx[j] += g * w[j];
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Piecewise max pooling: segments [0,p1], (p1,p2], (p2,T) with p1 <= p2 the entity
// positions. Output index is segment * F + filter.

template <std::floating_point Real>
struct PooledSegments {
  Tensor<Real> values;                // 3F
  std::vector<std::ptrdiff_t> argmax;  // source row per output, -1 for an empty segment
};

template <std::floating_point Real>
PooledSegments<Real> piecewise_max_pool(const Tensor<Real>& conv, std::size_t head_pos, std::size_t tail_pos,
                                        Real empty_value) {
  const std::size_t T = conv.rows(), F = conv.cols();
  const std::size_t p1 = std::min(head_pos, tail_pos), p2 = std::max(head_pos, tail_pos);
  if (p2 >= T)
    throw ContractViolation("entity position " + std::to_string(p2) + " outside sentence of length " +
                            std::to_string(T));
  const std::size_t bounds[4] = {0, p1 + 1, p2 + 1, T};
  PooledSegments<Real> out{Tensor<Real>({3 * F}, empty_value), std::vector<std::ptrdiff_t>(3 * F, -1)};
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t t = bounds[s]; t < bounds[s + 1]; ++t) {
      for (std::size_t f = 0; f < F; ++f) {
        const std::size_t o = s * F + f;
        if (out.argmax[o] < 0 || conv.at(t, f) > out.values[o]) {
          out.values[o] = conv.at(t, f);
          out.argmax[o] = static_cast<std::ptrdiff_t>(t);
        }
      }
    }
  }
  return out;
}

template <std::floating_point Real>
Tensor<Real> piecewise_max_pool_backward(const PooledSegments<Real>& pooled, std::span<const Real> d_pooled,
                                         std::size_t T) {
  const std::size_t F = pooled.values.size() / 3;
  Tensor<Real> d_conv({T, F});
  for (std::size_t o = 0; o < pooled.argmax.size(); ++o) {
    if (pooled.argmax[o] >= 0) d_conv.at(static_cast<std::size_t>(pooled.argmax[o]), o % F) += d_pooled[o];
  }
  return d_conv;
}

// ---------------------------------------------------------------------------

template <std::floating_point Real>
std::vector<Real> softmax(std::span<const Real> x) {
  if (x.empty()) throw ContractViolation("softmax of an empty vector");
  const Real peak = *std::max_element(x.begin(), x.end());
  std::vector<Real> out(x.size());
  Real sum = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += (out[i] = std::exp(x[i] - peak));
  for (auto& v : out) v /= sum;
  return out;
}

template <std::floating_point Real>
std::vector<Real> log_softmax(std::span<const Real> x) {
  if (x.empty()) throw ContractViolation("log_softmax of an empty vector");
  const Real peak = *std::max_element(x.begin(), x.end());
  Real sum = 0;
  for (Real v : x) sum += std::exp(v - peak);
  const Real log_sum = std::log(sum);
  std::vector<Real> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - peak) - log_sum;
  return out;
}

/// Given y = softmax(x) and dL/dy, returns dL/dx.
template <std::floating_point Real>
std::vector<Real> softmax_backward(std::span<const Real> y, std::span<const Real> dy) {
  Real dot = 0;
  for (std::size_t i = 0; i < y.size(); ++i) dot += y[i] * dy[i];
  std::vector<Real> dx(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] = y[i] * (dy[i] - dot);
  return dx;
}

// ---------------------------------------------------------------------------
// Inverted dropout. A mask holds 0 for dropped units and 1/(1-rate) for survivors.

template <std::floating_point Real>
std::vector<Real> make_dropout_mask(std::size_t n, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw DomainError("dropout rate must lie in [0, 1)");
  const Real keep_scale = static_cast<Real>(1.0 / (1.0 - rate));
  std::vector<Real> mask(n);
  for (auto& m : mask) m = rng.uniform01() < rate ? Real(0) : keep_scale;
  return mask;
}

template <std::floating_point Real>
Tensor<Real> dropout(const Tensor<Real>& x, double rate, Rng& rng, bool training) {
  if (!(rate >= 0.0 && rate < 1.0)) throw DomainError("dropout rate must lie in [0, 1)");
  if (!training || rate == 0.0) return x;
  auto mask = make_dropout_mask<Real>(x.size(), rate, rng);
  Tensor<Real> out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return out;
}

// ---------------------------------------------------------------------------

struct GradientCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  /// Coordinates sampled per parameter; parameters at most this large are checked fully.
  std::size_t coordinates_per_parameter = 64;
  /// Denominator floor of the relative error, so exact zeros compare absolutely.
  double scale_floor = 1e-6;
  std::uint64_t seed = 7;
};

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = true;
};

/// Compares each parameter's stored gradient with central finite differences of
/// `loss`. The caller fills the gradients beforehand; `loss` must not touch them.
template <std::floating_point Real>
GradientCheckReport check_gradient(const std::function<double()>& loss, std::span<Parameter<Real>* const> params,
                                   const GradientCheckOptions& options = {}) {
  GradientCheckReport report;
  Rng rng(options.seed);
  for (auto* p : params) {
    std::vector<std::size_t> coords(p->value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.coordinates_per_parameter) {
      rng.shuffle(coords);
      coords.resize(options.coordinates_per_parameter);
      std::sort(coords.begin(), coords.end());
    }
    for (auto i : coords) {
      const Real saved = p->value[i];
      p->value[i] = static_cast<Real>(saved + options.epsilon);
      const double plus = loss();
      p->value[i] = static_cast<Real>(saved - options.epsilon);
      const double minus = loss();
      p->value[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus))
        throw NumericError("non-finite loss while checking " + p->name);
      const double numeric = (plus - minus) / (2.0 * options.epsilon);
      const double analytic = static_cast<double>(p->gradient[i]);
      const double denom = std::max({std::abs(numeric), std::abs(analytic), options.scale_floor});
      const double rel = std::abs(numeric - analytic) / denom;
      ++report.coordinates_checked;
      if (rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = p->name;
        report.worst_index = i;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_relative_error <= options.tolerance;
  return report;
}

// ---------------------------------------------------------------------------
// Pretrained word vectors: "<count> <dim>" then "word v1 ... v_dim" per line.

struct PretrainedVectors {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;
};

inline PretrainedVectors read_pretrained_vectors(std::istream& in) {
  PretrainedVectors out;
  std::string line;
  std::size_t line_no = 1;
  std::size_t count = 0;
  if (!std::getline(in, line)) throw ParseError(1, "header", "missing '<vocab_count> <dim>' header");
  {
    std::istringstream header(line);
    if (!(header >> count >> out.dim) || out.dim == 0) throw ParseError(1, "header", "expected '<vocab_count> <dim>'");
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    std::vector<double> v;
    double x = 0;
    while (fields >> x) v.push_back(x);
    if (v.size() != out.dim)
      throw ParseError(line_no, "vector", "expected " + std::to_string(out.dim) + " values, found " +
                                              std::to_string(v.size()));
    out.vectors[word] = std::move(v);
  }
  if (out.vectors.size() != count)
    warn("pretrained vector file declares " + std::to_string(count) + " words but holds " +
         std::to_string(out.vectors.size()));
  return out;
}

inline PretrainedVectors load_pretrained_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read embedding file '" + path + "'");
  return read_pretrained_vectors(in);
}

// ---------------------------------------------------------------------------
// Checkpoint: every named parameter with its shape and values. Doubles are written in
// shortest round-trip form, so reading back is exact for both float and double.

template <std::floating_point Real>
nlohmann::json parameters_to_json(std::span<const Parameter<Real>* const> params) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto* p : params) {
    std::vector<double> values(p->value.values().begin(), p->value.values().end());
    arr.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"values", std::move(values)}});
  }
  return arr;
}

/// Loads values into existing parameters, matching by name and shape.
template <std::floating_point Real>
void parameters_from_json(const nlohmann::json& arr, std::span<Parameter<Real>* const> params) {
  std::unordered_map<std::string, const nlohmann::json*> by_name;
  for (const auto& entry : arr) by_name[entry.at("name").get<std::string>()] = &entry;
  for (auto* p : params) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw Error("checkpoint lacks parameter '" + p->name + "'");
    auto shape = it->second->at("shape").template get<std::vector<std::size_t>>();
    if (shape != p->value.shape()) {
      auto show = [](const std::vector<std::size_t>& s) {
        std::string out = "[";
        for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
        return out + "]";
      };
      throw Error("parameter '" + p->name + "' shape mismatch: expected " + show(p->value.shape()) + ", found " +
                  show(shape));
    }
    auto values = it->second->at("values").template get<std::vector<double>>();
    if (values.size() != p->value.size())
      throw Error("parameter '" + p->name + "' has " + std::to_string(values.size()) + " values, expected " +
                  std::to_string(p->value.size()));
    for (std::size_t i = 0; i < values.size(); ++i) p->value[i] = static_cast<Real>(values[i]);
    p->zero_grad();
  }
}

}  // namespace relx
