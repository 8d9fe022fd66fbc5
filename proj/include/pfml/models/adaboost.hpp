#pragma once

// Two-class SAMME boosting over depth-1 CART stumps.

#include <cmath>
#include <numeric>
#include <vector>

#include "pfml/models/tree.hpp"

namespace pfml::models {

/// Weak-learner weight ln((1 - err) / err). Non-positive for err >= 0.5.
inline double boosting_alpha(double err) { return std::log((1.0 - err) / err); }

struct AdaBoostTrace {
  std::vector<double> errors;
  std::vector<double> alphas;
  std::vector<double> weight_sums;  // after renormalization, one per round
};

class AdaBoost {
 public:
  struct Member {
    DecisionTree stump;
    double alpha = 0.0;
  };

  static AdaBoost fit(const Matrix& x, Labels y, int n_estimators, AdaBoostTrace* trace = nullptr) {
    const std::size_t pos = check_training_set(x, y);
    if (single_class(pos, y.size())) throw Error("degenerate labels");
    if (n_estimators < 1) throw Error("boosting needs at least one round");
    const std::size_t n = y.size();
    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    TreeParams stump;
    stump.max_depth = 1;
    AdaBoost model;
    for (int round = 0; round < n_estimators; ++round) {
      DecisionTree t = DecisionTree::fit(x, y, w, stump);
      std::vector<char> wrong(n);
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        wrong[i] = t.predict_one(x.row(static_cast<Eigen::Index>(i))) != y[i];
        if (wrong[i]) err += w[i];
      }
      err /= std::accumulate(w.begin(), w.end(), 0.0);
      if (trace) trace->errors.push_back(err);
      if (err <= 0.0) {
        // A perfect stump decides alone; its weight stands in for +inf.
        constexpr double kTiny = 1e-10;
        model.members_.push_back({std::move(t), boosting_alpha(kTiny)});
        if (trace) trace->alphas.push_back(model.members_.back().alpha);
        break;
      }
      const double alpha = boosting_alpha(err);
      if (err >= 0.5) {
        // No better than chance: halt. An empty ensemble keeps the stump
        // with zero weight so that it scores 0.5 everywhere.
        if (model.members_.empty()) model.members_.push_back({std::move(t), 0.0});
        if (trace) trace->alphas.push_back(std::max(alpha, 0.0));
        break;
      }
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (wrong[i]) w[i] *= std::exp(alpha);
        sum += w[i];
      }
      for (double& v : w) v /= sum;
      model.members_.push_back({std::move(t), alpha});
      if (trace) {
        trace->alphas.push_back(alpha);
        trace->weight_sums.push_back(std::accumulate(w.begin(), w.end(), 0.0));
      }
    }
    return model;
  }

  /// Weighted vote margin in [-1, 1] mapped to [0, 1].
  template <typename Row>
  double score_one(const Row& row) const {
    double margin = 0.0, total = 0.0;
    for (const auto& m : members_) {
      margin += m.alpha * (m.stump.predict_one(row) ? 1.0 : -1.0);
      total += m.alpha;
    }
    if (total <= 0.0) return 0.5;
    return 0.5 * (margin / total + 1.0);
  }

  Vector score(const Matrix& x) const {
    Vector s(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) s(i) = score_one(x.row(i));
    return s;
  }

  const std::vector<Member>& members() const noexcept { return members_; }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : members_) arr.push_back({{"alpha", m.alpha}, {"stump", m.stump.to_json()}});
    return {{"members", arr}};
  }

  static AdaBoost from_json(const nlohmann::json& j) {
    AdaBoost a;
    for (const auto& m : j.at("members"))
      a.members_.push_back({DecisionTree::from_json(m.at("stump")), m.at("alpha").get<double>()});
    if (a.members_.empty()) throw Error("boosted model has no members");
    return a;
  }

 private:
  std::vector<Member> members_;
};

}  // namespace pfml::models
