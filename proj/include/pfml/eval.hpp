#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pfml/dataset.hpp"
#include "pfml/error.hpp"
#include "pfml/models/model.hpp"
#include "pfml/rng.hpp"

namespace pfml {

enum class Averaging { kBinaryPos1, kMacro, kWeighted };

constexpr std::string_view averaging_name(Averaging a) {
  switch (a) {
    case Averaging::kBinaryPos1: return "binary";
    case Averaging::kMacro: return "macro";
    case Averaging::kWeighted: return "weighted";
  }
  return "";
}

inline Averaging averaging_from_name(std::string_view s) {
  if (s == "binary" || s == "binary_pos1") return Averaging::kBinaryPos1;
  if (s == "macro") return Averaging::kMacro;
  if (s == "weighted") return Averaging::kWeighted;
  throw Error("unknown averaging '" + std::string(s) + "'");
}

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double roc_auc = 0.0;
  double accuracy = 0.0;
  long tp = 0, fp = 0, tn = 0, fn = 0;
  Averaging averaging = Averaging::kWeighted;

  nlohmann::json to_json() const {
    return {{"averaging", std::string(averaging_name(averaging))},
            {"precision", precision},
            {"recall", recall},
            {"f1", f1},
            {"roc_auc", roc_auc},
            {"accuracy", accuracy},
            {"tp", tp},
            {"fp", fp},
            {"tn", tn},
            {"fn", fn}};
  }
};

namespace detail {

inline void check_metric_inputs(std::span<const int> y_true, std::size_t other, std::string_view what) {
  if (y_true.empty()) throw Error("metrics need at least one sample");
  if (y_true.size() != other) throw Error(std::string(what) + " length differs from y_true");
  for (int v : y_true)
    if (v != 0 && v != 1) throw Error("labels must be 0 or 1");
}

inline double safe_div(double a, double b) { return b > 0.0 ? a / b : 0.0; }

inline double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace detail

/// Area under the ROC curve: scores sorted descending, equal scores merged
/// into one threshold step, trapezoids between consecutive points.
inline double roc_auc(std::span<const int> y_true, std::span<const double> y_score) {
  detail::check_metric_inputs(y_true, y_score.size(), "y_score");
  std::vector<std::size_t> order(y_true.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return y_score[a] > y_score[b]; });
  double pos = 0, neg = 0;
  for (int v : y_true) (v ? pos : neg) += 1.0;
  if (pos == 0 || neg == 0) throw Error("AUC requires both classes");
  double tp = 0, fp = 0, prev_tp = 0, prev_fp = 0, area = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double s = y_score[order[k]];
    while (k < order.size() && y_score[order[k]] == s) {
      (y_true[order[k]] ? tp : fp) += 1.0;
      ++k;
    }
    area += (fp - prev_fp) * (tp + prev_tp) * 0.5;
    prev_tp = tp;
    prev_fp = fp;
  }
  return area / (pos * neg);
}

/// Brute-force pair count: P(score_pos > score_neg) + 0.5 P(equal).
inline double roc_auc_oracle(std::span<const int> y_true, std::span<const double> y_score) {
  detail::check_metric_inputs(y_true, y_score.size(), "y_score");
  double wins = 0, pos = 0, neg = 0;
  for (int v : y_true) (v ? pos : neg) += 1.0;
  if (pos == 0 || neg == 0) throw Error("AUC requires both classes");
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (!y_true[i]) continue;
    for (std::size_t j = 0; j < y_true.size(); ++j) {
      if (y_true[j]) continue;
      if (y_score[i] > y_score[j]) wins += 1.0;
      else if (y_score[i] == y_score[j]) wins += 0.5;
    }
  }
  return wins / (pos * neg);
}

/// Precision, recall and F1 under the chosen averaging plus accuracy and
/// AUC. Per-class values use 0 for an empty denominator. The reported F1
/// is the harmonic mean of the reported precision and recall.
inline MetricsReport compute_metrics(std::span<const int> y_true, std::span<const int> y_pred,
                                     std::span<const double> y_score, Averaging averaging = Averaging::kWeighted) {
  detail::check_metric_inputs(y_true, y_pred.size(), "y_pred");
  detail::check_metric_inputs(y_true, y_score.size(), "y_score");
  MetricsReport m;
  m.averaging = averaging;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_pred[i] != 0 && y_pred[i] != 1) throw Error("predictions must be 0 or 1");
    if (!(y_score[i] >= 0.0 && y_score[i] <= 1.0)) throw Error("scores must lie in [0, 1]");
    if (y_true[i] && y_pred[i]) ++m.tp;
    else if (y_true[i]) ++m.fn;
    else if (y_pred[i]) ++m.fp;
    else ++m.tn;
  }
  const double tp = static_cast<double>(m.tp), fp = static_cast<double>(m.fp);
  const double tn = static_cast<double>(m.tn), fn = static_cast<double>(m.fn);
  const double n = tp + fp + tn + fn;
  m.accuracy = (tp + tn) / n;

  const double p1 = detail::safe_div(tp, tp + fp), r1 = detail::safe_div(tp, tp + fn);
  const double p0 = detail::safe_div(tn, tn + fn), r0 = detail::safe_div(tn, tn + fp);
  switch (averaging) {
    case Averaging::kBinaryPos1:
      m.precision = p1;
      m.recall = r1;
      break;
    case Averaging::kMacro:
      m.precision = 0.5 * (p0 + p1);
      m.recall = 0.5 * (r0 + r1);
      break;
    case Averaging::kWeighted: {
      const double s1 = tp + fn, s0 = tn + fp;
      m.precision = (s0 * p0 + s1 * p1) / n;
      m.recall = (s0 * r0 + s1 * r1) / n;
      break;
    }
  }
  m.f1 = detail::harmonic(m.precision, m.recall);
  m.roc_auc = roc_auc(y_true, y_score);
  return m;
}

inline double accuracy(std::span<const int> y_true, std::span<const int> y_pred) {
  detail::check_metric_inputs(y_true, y_pred.size(), "y_pred");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) hit += y_true[i] == y_pred[i];
  return static_cast<double>(hit) / static_cast<double>(y_true.size());
}

// ---------------------------------------------------------------------------
// Permutation importance

struct ImportanceEntry {
  std::string name;
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> samples;
};

struct ImportanceReport {
  double baseline = 0.0;
  std::vector<ImportanceEntry> entries;  // sorted by mean, descending

  const ImportanceEntry& at(std::string_view name) const {
    for (const auto& e : entries)
      if (e.name == name) return e;
    throw Error("no importance entry for '" + std::string(name) + "'");
  }

  std::size_t rank_of(std::string_view name) const {
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].name == name) return i;
    throw Error("no importance entry for '" + std::string(name) + "'");
  }
};

/// Supplies the row permutation for (feature name, repeat index).
using Permuter = std::function<std::vector<std::size_t>(std::string_view feature, int repeat, std::size_t n)>;

/// Shuffles drawn from a stream seeded by (seed, feature name, repeat), so
/// results do not depend on column positions.
inline Permuter seeded_permuter(std::uint64_t seed) {
  return [seed](std::string_view feature, int repeat, std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    Rng rng = make_rng(derive_seed(seed, "importance", feature, static_cast<std::uint64_t>(repeat)));
    shuffle(p.begin(), p.end(), rng);
    return p;
  };
}

inline Permuter identity_permuter() {
  return [](std::string_view, int, std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), 0);
    return p;
  };
}

/// Drop in accuracy when one column is shuffled, repeated `repeats` times
/// per feature. Columns of `table` are matched to the model by name; the
/// table itself is never modified. Standard deviation is the population
/// form over repeats.
inline ImportanceReport permutation_importance(const TrainedModel& model, const FeatureTable& table, int repeats,
                                               const Permuter& permuter) {
  if (table.rows() == 0) throw Error("importance needs a non-empty dataset");
  if (repeats < 1) throw Error("importance needs at least one repeat");
  const models::Matrix x = model.align(table.x, table.names);
  ImportanceReport rep;
  rep.baseline = accuracy(table.y, model.predict(x));
  const auto n = static_cast<std::size_t>(x.rows());
  models::Matrix work = x;
  for (std::size_t j = 0; j < model.feature_order().size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    const std::string& name = model.feature_order()[j];
    ImportanceEntry e;
    e.name = name;
    for (int r = 0; r < repeats; ++r) {
      const auto perm = permuter(name, r, n);
      if (perm.size() != n) throw Error("permutation has the wrong length");
      for (std::size_t i = 0; i < n; ++i)
        work(static_cast<Eigen::Index>(i), col) = x(static_cast<Eigen::Index>(perm[i]), col);
      e.samples.push_back(rep.baseline - accuracy(table.y, model.predict(work)));
    }
    work.col(col) = x.col(col);
    e.mean = std::accumulate(e.samples.begin(), e.samples.end(), 0.0) / repeats;
    double ss = 0.0;
    for (double s : e.samples) ss += (s - e.mean) * (s - e.mean);
    e.std = std::sqrt(ss / repeats);
    rep.entries.push_back(std::move(e));
  }
  std::stable_sort(rep.entries.begin(), rep.entries.end(),
                   [](const ImportanceEntry& a, const ImportanceEntry& b) { return a.mean > b.mean; });
  return rep;
}

inline ImportanceReport permutation_importance(const TrainedModel& model, const FeatureTable& table, int repeats = 10,
                                               std::uint64_t seed = 0) {
  return permutation_importance(model, table, repeats, seeded_permuter(seed));
}

inline ImportanceReport permutation_importance(const TrainedModel& model, const Dataset& ds, int repeats = 10,
                                               std::uint64_t seed = 0) {
  return permutation_importance(model, to_table(ds), repeats, seeded_permuter(seed));
}

// ---------------------------------------------------------------------------
// Report rendering

inline std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

/// "feature,mean,std" with full-precision values, in report order.
inline std::string importance_csv(const ImportanceReport& rep) {
  std::string out = "feature,mean,std\n";
  for (const auto& e : rep.entries)
    out += e.name + "," + csv::format_double(e.mean) + "," + csv::format_double(e.std) + "\n";
  return out;
}

/// Ranked table of the top_k entries, e.g. "1.  Laser Focus (mm)  0.142 +/- 0.007".
inline std::string importance_table(const ImportanceReport& rep, std::size_t top_k = 15) {
  const std::size_t k = std::min(top_k, rep.entries.size());
  std::size_t width = 7;
  for (std::size_t i = 0; i < k; ++i) width = std::max(width, display_name(rep.entries[i].name).size());
  std::string out;
  char buf[512];
  std::snprintf(buf, sizeof buf, "Top %zu important features (baseline accuracy %s)\n", k, fixed3(rep.baseline).c_str());
  out += buf;
  std::snprintf(buf, sizeof buf, "%-5s%-*s  %s\n", "Rank", static_cast<int>(width), "Feature", "Importance");
  out += buf;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& e = rep.entries[i];
    const std::string rank = std::to_string(i + 1) + ".";
    std::snprintf(buf, sizeof buf, "%-5s%-*s  %s +/- %s\n", rank.c_str(), static_cast<int>(width),
                  display_name(e.name).c_str(), fixed3(e.mean).c_str(), fixed3(e.std).c_str());
    out += buf;
  }
  return out;
}

struct ModelResult {
  ModelKind kind;
  MetricsReport metrics;
};

/// Aligned text table with columns P, R, F1, AUC, Acc.
inline std::string metrics_table(const std::vector<ModelResult>& results) {
  std::size_t width = 5;
  for (const auto& r : results) width = std::max(width, kind_label(r.kind).size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %5s  %5s  %5s  %5s  %5s\n", static_cast<int>(width), "Model", "P", "R", "F1",
                "AUC", "Acc.");
  out += buf;
  for (const auto& r : results) {
    const auto& m = r.metrics;
    std::snprintf(buf, sizeof buf, "%-*s  %5.2f  %5.2f  %5.2f  %5.2f  %5.2f\n", static_cast<int>(width),
                  std::string(kind_label(r.kind)).c_str(), m.precision, m.recall, m.f1, m.roc_auc, m.accuracy);
    out += buf;
  }
  return out;
}

}  // namespace pfml
