#pragma once

#include <cmath>
#include <vector>

#include "pfml/models/tree.hpp"
#include "pfml/rng.hpp"

namespace pfml::models {

struct ForestParams {
  int n_estimators = 50;
  bool bootstrap = true;
  TreeParams tree;  // tree.max_features = 0 grows bagged trees on all features
};

/// Majority-vote ensemble of CART trees. Member t draws its bootstrap
/// sample and split features from a stream derived from (seed, t), so
/// members are independent of training order.
class TreeEnsemble {
 public:
  static TreeEnsemble fit(const Matrix& x, Labels y, const ForestParams& p, std::uint64_t seed) {
    check_training_set(x, y);
    if (p.n_estimators < 1) throw Error("ensemble needs at least one estimator");
    const std::size_t n = y.size();
    TreeEnsemble e;
    e.trees_.reserve(static_cast<std::size_t>(p.n_estimators));
    for (int t = 0; t < p.n_estimators; ++t) {
      Rng rng = make_rng(derive_seed(seed, "tree", static_cast<std::uint64_t>(t)));
      std::vector<double> w(n, p.bootstrap ? 0.0 : 1.0);
      if (p.bootstrap)
        for (std::size_t k = 0; k < n; ++k) w[uniform_index(rng, n)] += 1.0;
      e.trees_.push_back(DecisionTree::fit(x, y, w, p.tree, &rng));
    }
    return e;
  }

  /// Fraction of members voting 1.
  template <typename Row>
  double score_one(const Row& row) const {
    int votes = 0;
    for (const auto& t : trees_) votes += t.predict_one(row);
    return static_cast<double>(votes) / static_cast<double>(trees_.size());
  }

  Vector score(const Matrix& x) const {
    Vector s(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) s(i) = score_one(x.row(i));
    return s;
  }

  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : trees_) arr.push_back(t.to_json());
    return {{"trees", arr}};
  }

  static TreeEnsemble from_json(const nlohmann::json& j) {
    TreeEnsemble e;
    for (const auto& t : j.at("trees")) e.trees_.push_back(DecisionTree::from_json(t));
    if (e.trees_.empty()) throw Error("ensemble has no trees");
    return e;
  }

 private:
  std::vector<DecisionTree> trees_;
};

}  // namespace pfml::models
