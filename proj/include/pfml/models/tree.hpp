#pragma once

// CART classification tree with Gini impurity and per-sample weights.
// Bootstrap resampling is expressed as integer weights, which leaves every
// impurity computation identical to training on the duplicated rows.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "pfml/models/common.hpp"
#include "pfml/rng.hpp"

namespace pfml::models {

struct TreeParams {
  int max_depth = 0;          // 0 = unlimited
  int min_samples_split = 2;  // nodes with fewer distinct rows become leaves
  int max_features = 0;       // features drawn per split; 0 = all
};

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

inline double gini(double w0, double w1) {
  const double w = w0 + w1;
  if (w <= 0.0) return 0.0;
  const double p0 = w0 / w, p1 = w1 / w;
  return 1.0 - p0 * p0 - p1 * p1;
}

/// Best Gini split of `rows` over the given candidate features. Thresholds
/// are midpoints between consecutive distinct values; rows with
/// x <= threshold go left. Ties keep the earliest (feature, threshold) in
/// scan order. Returns nullopt when no feature takes two distinct values.
inline std::optional<Split> find_best_split(const Matrix& x, Labels y, std::span<const double> w,
                                            std::span<const std::size_t> rows, std::span<const int> features) {
  double tot0 = 0.0, tot1 = 0.0;
  for (std::size_t r : rows) (y[r] ? tot1 : tot0) += w[r];
  const double total = tot0 + tot1;
  const double parent = gini(tot0, tot1);

  std::optional<Split> best;
  std::vector<std::size_t> order(rows.begin(), rows.end());
  for (int f : features) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double va = x(static_cast<Eigen::Index>(a), f), vb = x(static_cast<Eigen::Index>(b), f);
      return va < vb || (va == vb && a < b);
    });
    double l0 = 0.0, l1 = 0.0;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      const std::size_t r = order[k];
      (y[r] ? l1 : l0) += w[r];
      const double v = x(static_cast<Eigen::Index>(r), f);
      const double next = x(static_cast<Eigen::Index>(order[k + 1]), f);
      if (next <= v) continue;
      const double wl = l0 + l1, wr = total - wl;
      const double gain = parent - (wl / total) * gini(l0, l1) - (wr / total) * gini(tot0 - l0, tot1 - l1);
      if (!best || gain > best->gain) {
        double thr = 0.5 * (v + next);
        if (thr >= next) thr = v;
        best = Split{f, thr, gain};
      }
    }
  }
  return best;
}

class DecisionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // weighted fraction of label 1
  };

  /// Fits on rows with positive weight. `rng` is required when
  /// params.max_features restricts the candidate set.
  static DecisionTree fit(const Matrix& x, Labels y, std::span<const double> w, const TreeParams& params,
                          Rng* rng = nullptr) {
    if (static_cast<std::size_t>(x.rows()) != y.size() || y.size() != w.size())
      throw Error("tree input sizes disagree");
    DecisionTree t;
    t.n_features_ = static_cast<int>(x.cols());
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < w.size(); ++i)
      if (w[i] > 0.0) rows.push_back(i);
    if (rows.empty()) throw Error("tree training set has no weighted rows");
    t.grow(x, y, w, std::move(rows), 0, params, rng);
    return t;
  }

  static DecisionTree fit(const Matrix& x, Labels y, const TreeParams& params = {}, Rng* rng = nullptr) {
    const std::vector<double> w(y.size(), 1.0);
    return fit(x, y, w, params, rng);
  }

  template <typename Row>
  double predict_value(const Row& row) const {
    int i = 0;
    while (nodes_[static_cast<std::size_t>(i)].feature >= 0) {
      const Node& n = nodes_[static_cast<std::size_t>(i)];
      i = row(n.feature) <= n.threshold ? n.left : n.right;
    }
    return nodes_[static_cast<std::size_t>(i)].value;
  }

  /// Label 1 when the leaf holds at least half the weight in class 1.
  template <typename Row>
  int predict_one(const Row& row) const {
    return predict_value(row) >= 0.5 ? 1 : 0;
  }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  int n_features() const noexcept { return n_features_; }
  const Node& root() const { return nodes_.front(); }

  /// Features referenced by any internal node.
  std::vector<int> used_features() const {
    std::vector<int> out;
    for (const auto& n : nodes_)
      if (n.feature >= 0) out.push_back(n.feature);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  int depth() const { return depth_of(0); }

  nlohmann::json to_json() const { return {{"n_features", n_features_}, {"root", node_json(0)}}; }

  static DecisionTree from_json(const nlohmann::json& j) {
    DecisionTree t;
    t.n_features_ = j.at("n_features").get<int>();
    t.read_node(j.at("root"));
    return t;
  }

 private:
  int grow(const Matrix& x, Labels y, std::span<const double> w, std::vector<std::size_t> rows, int depth,
           const TreeParams& p, Rng* rng) {
    double w0 = 0.0, w1 = 0.0;
    for (std::size_t r : rows) (y[r] ? w1 : w0) += w[r];
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{-1, 0.0, -1, -1, w1 / (w0 + w1)});

    const bool pure = w0 == 0.0 || w1 == 0.0;
    const bool too_small = static_cast<int>(rows.size()) < p.min_samples_split;
    const bool too_deep = p.max_depth > 0 && depth >= p.max_depth;
    if (pure || too_small || too_deep) return id;

    std::optional<Split> split;
    const int d = n_features_;
    if (p.max_features > 0 && p.max_features < d) {
      if (!rng) throw Error("feature subsampling requires a random stream");
      std::vector<int> all(static_cast<std::size_t>(d));
      std::iota(all.begin(), all.end(), 0);
      // Partial Fisher-Yates; if the drawn subset cannot split, the
      // remaining features are tried too.
      for (int k = 0; k < p.max_features; ++k) {
        const auto j = static_cast<std::size_t>(k) + uniform_index(*rng, static_cast<std::size_t>(d - k));
        std::swap(all[static_cast<std::size_t>(k)], all[j]);
      }
      std::vector<int> drawn(all.begin(), all.begin() + p.max_features);
      std::sort(drawn.begin(), drawn.end());
      split = find_best_split(x, y, w, rows, drawn);
      if (!split) {
        std::vector<int> rest(all.begin() + p.max_features, all.end());
        std::sort(rest.begin(), rest.end());
        split = find_best_split(x, y, w, rows, rest);
      }
    } else {
      std::vector<int> all(static_cast<std::size_t>(d));
      std::iota(all.begin(), all.end(), 0);
      split = find_best_split(x, y, w, rows, all);
    }
    if (!split) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows)
      (x(static_cast<Eigen::Index>(r), split->feature) <= split->threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = grow(x, y, w, std::move(left), depth + 1, p, rng);
    const int r = grow(x, y, w, std::move(right), depth + 1, p, rng);
    Node& n = nodes_[static_cast<std::size_t>(id)];
    n.feature = split->feature;
    n.threshold = split->threshold;
    n.left = l;
    n.right = r;
    return id;
  }

  int depth_of(int i) const {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.feature < 0) return 0;
    return 1 + std::max(depth_of(n.left), depth_of(n.right));
  }

  nlohmann::json node_json(int i) const {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.feature < 0) return {{"value", n.value}};
    return {{"feature", n.feature},
            {"threshold", n.threshold},
            {"value", n.value},
            {"left", node_json(n.left)},
            {"right", node_json(n.right)}};
  }

  int read_node(const nlohmann::json& j) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{-1, 0.0, -1, -1, j.at("value").get<double>()});
    if (j.contains("feature")) {
      const int f = j.at("feature").get<int>();
      if (f < 0 || f >= n_features_) throw Error("tree node references feature out of range");
      const double thr = j.at("threshold").get<double>();
      const int l = read_node(j.at("left"));
      const int r = read_node(j.at("right"));
      Node& n = nodes_[static_cast<std::size_t>(id)];
      n.feature = f;
      n.threshold = thr;
      n.left = l;
      n.right = r;
    }
    return id;
  }

  std::vector<Node> nodes_;
  int n_features_ = 0;
};

}  // namespace pfml::models
