#pragma once

// Held-out ranking metrics and Borda aggregation across methods.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "relx/corpus.hpp"
#include "relx/error.hpp"
#include "relx/trainer.hpp"

namespace relx {

struct RankedPrediction {
  std::pair<std::string, std::string> entity_pair;
  std::string relation;
  double score = 0.0;
  bool is_correct = false;
};

using GoldFacts = std::set<std::tuple<std::string, std::string, std::string>>;

/// Distinct non-NA (head id, tail id, relation) triples.
inline GoldFacts gold_facts(const std::vector<SentenceInstance>& instances) {
  GoldFacts gold;
  for (const auto& s : instances)
    if (!s.is_na() && s.has_pair())
      gold.emplace(s.head_mention().entity_id, s.tail_mention().entity_id, s.relation_label);
  return gold;
}

inline std::vector<RankedPrediction> mark_correct(const std::vector<Prediction>& predictions, const GoldFacts& gold) {
  std::vector<RankedPrediction> out;
  out.reserve(predictions.size());
  for (const auto& p : predictions) {
    const bool ok = gold.contains({p.entity_pair.first, p.entity_pair.second, p.relation});
    out.push_back({p.entity_pair, p.relation, p.score, ok});
  }
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].score > out[i - 1].score) throw ContractViolation("predictions are not sorted by score");
  return out;
}

/// Fraction correct among the first min(n, size) predictions.
inline double precision_at(const std::vector<RankedPrediction>& preds, std::size_t n) {
  if (n == 0) throw DomainError("precision_at needs n >= 1");
  if (preds.empty()) {
    warn("precision_at on an empty prediction list is 0");
    return 0.0;
  }
  const std::size_t m = std::min(n, preds.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < m; ++i) correct += preds[i].is_correct ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(m);
}

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;

  bool operator==(const PrPoint&) const = default;
};

/// One (recall, precision) point per rank.
inline std::vector<PrPoint> pr_curve(const std::vector<RankedPrediction>& preds, std::size_t total_gold) {
  if (total_gold == 0) throw DomainError("precision-recall curve needs at least one gold fact");
  std::vector<PrPoint> out;
  out.reserve(preds.size());
  std::size_t correct = 0;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    correct += preds[k].is_correct ? 1 : 0;
    out.push_back({static_cast<double>(correct) / static_cast<double>(total_gold),
                   static_cast<double>(correct) / static_cast<double>(k + 1)});
  }
  return out;
}

/// Trapezoidal area under precision over recall. The curve is extended to recall 0 at
/// the first point's precision, so a perfect ranking scores exactly 1.
inline double auc(const std::vector<PrPoint>& points) {
  if (points.empty()) {
    warn("AUC of an empty curve is 0");
    return 0.0;
  }
  double area = 0.0;
  PrPoint prev{0.0, points.front().precision};
  for (const auto& p : points) {
    if (p.recall < prev.recall) throw ContractViolation("PR points must be sorted by recall");
    area += (p.recall - prev.recall) * (p.precision + prev.precision) / 2.0;
    prev = p;
  }
  return std::clamp(area, 0.0, 1.0);
}

inline double max_f1(const std::vector<PrPoint>& points) {
  double best = 0.0;
  for (const auto& p : points) {
    const double denom = p.precision + p.recall;
    if (denom > 0.0) best = std::max(best, 2.0 * p.precision * p.recall / denom);
  }
  return best;
}

struct MetricReport {
  double auc = 0.0;
  double max_f1 = 0.0;
  std::map<std::size_t, double> p_at;
  std::vector<PrPoint> pr_points;
  double mean_precision = 0.0;
};

inline const std::vector<std::size_t>& default_p_at() {
  static const std::vector<std::size_t> values{100, 200, 300};
  return values;
}

/// Metrics for a ranked list. An empty list yields zeros with a warning.
inline MetricReport evaluate(const std::vector<RankedPrediction>& preds, std::size_t total_gold,
                             const std::vector<std::size_t>& p_at = default_p_at()) {
  MetricReport r;
  if (total_gold == 0 || preds.empty()) {
    warn(total_gold == 0 ? "no gold facts; metrics are 0" : "no predictions; metrics are 0");
    for (auto n : p_at) r.p_at[n] = 0.0;
    return r;
  }
  r.pr_points = pr_curve(preds, total_gold);
  r.auc = auc(r.pr_points);
  r.max_f1 = max_f1(r.pr_points);
  double sum = 0.0;
  for (auto n : p_at) sum += (r.p_at[n] = precision_at(preds, n));
  r.mean_precision = p_at.empty() ? 0.0 : sum / static_cast<double>(p_at.size());
  return r;
}

// ---------------------------------------------------------------------------

struct BordaRow {
  std::string label;
  std::string k_label;
  MetricReport report;
  int borda = 0;
};

inline std::array<double, 6> borda_columns(const MetricReport& r) {
  auto p = [&](std::size_t n) {
    auto it = r.p_at.find(n);
    return it == r.p_at.end() ? 0.0 : it->second;
  };
  return {r.auc, r.max_f1, p(100), p(200), p(300), r.mean_precision};
}

/// Each row earns, per metric column, one point for every row strictly worse in that
/// column. Rows come back sorted by score desc, then label.
inline std::vector<BordaRow> borda_rank(std::vector<BordaRow> rows) {
  if (rows.size() < 2) warn("Borda ranking of fewer than two rows");
  std::vector<std::array<double, 6>> cols;
  for (const auto& row : rows) cols.push_back(borda_columns(row.report));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    int points = 0;
    for (std::size_t c = 0; c < 6; ++c)
      for (std::size_t j = 0; j < rows.size(); ++j) points += cols[j][c] < cols[i][c] ? 1 : 0;
    rows[i].borda = points;
  }
  std::stable_sort(rows.begin(), rows.end(), [](const BordaRow& a, const BordaRow& b) {
    if (a.borda != b.borda) return a.borda > b.borda;
    return std::tie(a.label, a.k_label) < std::tie(b.label, b.k_label);
  });
  return rows;
}

// ---------------------------------------------------------------------------
// Files

inline std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

/// label, auc, max_f1, p100, p200, p300, mean, borda
inline void write_metrics_row(std::ostream& out, const std::string& label, const MetricReport& r, int borda) {
  const auto c = borda_columns(r);
  out << label;
  for (double v : c) out << '\t' << format_fixed(v, 3);
  out << '\t' << borda << '\n';
}

/// Parses metric rows; the label column may carry a "method|k" split.
inline std::vector<BordaRow> read_metrics(std::istream& in) {
  std::vector<BordaRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string label;
    std::getline(fields, label, '\t');
    std::array<double, 6> v{};
    std::string cell;
    for (std::size_t c = 0; c < 6; ++c) {
      if (!std::getline(fields, cell, '\t')) throw ParseError(line_no, "metrics", "expected 8 tab-separated columns");
      try {
        v[c] = std::stod(cell);
      } catch (const std::exception&) {
        throw ParseError(line_no, "metrics", "non-numeric value '" + cell + "'");
      }
    }
    BordaRow row;
    auto bar = label.find('|');
    row.label = label.substr(0, bar);
    if (bar != std::string::npos) row.k_label = label.substr(bar + 1);
    row.report.auc = v[0];
    row.report.max_f1 = v[1];
    row.report.p_at = {{100, v[2]}, {200, v[3]}, {300, v[4]}};
    row.report.mean_precision = v[5];
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void write_pr_curve(std::ostream& out, const std::vector<PrPoint>& points) {
  for (const auto& p : points) out << format_fixed(p.recall, 6) << '\t' << format_fixed(p.precision, 6) << '\n';
}

/// head<TAB>tail<TAB>relation<TAB>score, ranked.
inline void write_predictions(std::ostream& out, const std::vector<Prediction>& preds) {
  char buf[64];
  for (const auto& p : preds) {
    std::snprintf(buf, sizeof buf, "%.17g", p.score);
    out << p.entity_pair.first << '\t' << p.entity_pair.second << '\t' << p.relation << '\t' << buf << '\n';
  }
}

inline std::vector<Prediction> read_predictions(std::istream& in) {
  std::vector<Prediction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    Prediction p;
    std::string score;
    if (!std::getline(fields, p.entity_pair.first, '\t') || !std::getline(fields, p.entity_pair.second, '\t') ||
        !std::getline(fields, p.relation, '\t') || !std::getline(fields, score, '\t'))
      throw ParseError(line_no, "prediction", "expected head<TAB>tail<TAB>relation<TAB>score");
    try {
      p.score = std::stod(score);
    } catch (const std::exception&) {
      throw ParseError(line_no, "score", "not a number");
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace relx
