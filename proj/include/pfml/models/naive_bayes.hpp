#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include "pfml/models/common.hpp"

namespace pfml::models {

/// Gaussian naive Bayes with per-class means and (floored) variances.
class GaussianNb {
 public:
  static GaussianNb fit(const Matrix& x, Labels y, double var_floor = 1e-9) {
    const std::size_t pos = check_training_set(x, y);
    const auto n = static_cast<double>(y.size());
    GaussianNb m;
    const Eigen::Index d = x.cols();
    for (int c = 0; c < 2; ++c) {
      const double count = c == 1 ? static_cast<double>(pos) : n - static_cast<double>(pos);
      m.log_prior_[c] = count > 0 ? std::log(count / n) : -std::numeric_limits<double>::infinity();
      m.mean_[c] = Vector::Zero(d);
      m.var_[c] = Vector::Constant(d, var_floor);
      if (count == 0) continue;
      Vector sum = Vector::Zero(d);
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        if (y[static_cast<std::size_t>(i)] == c) sum += x.row(i).transpose();
      m.mean_[c] = sum / count;
      Vector ss = Vector::Zero(d);
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        if (y[static_cast<std::size_t>(i)] == c) ss += (x.row(i).transpose() - m.mean_[c]).cwiseAbs2();
      m.var_[c] = (ss / count).cwiseMax(var_floor);
    }
    return m;
  }

  /// Joint log-likelihood log P(c) + sum_j log N(x_j; mu_cj, var_cj).
  template <typename Row>
  double joint_log_likelihood(const Row& row, int c) const {
    if (std::isinf(log_prior_[c])) return log_prior_[c];
    double ll = log_prior_[c];
    for (Eigen::Index j = 0; j < mean_[c].size(); ++j) {
      const double v = var_[c](j);
      const double diff = row(j) - mean_[c](j);
      ll += -0.5 * std::log(2.0 * std::numbers::pi * v) - 0.5 * diff * diff / v;
    }
    return ll;
  }

  /// Posterior P(label = 1 | x).
  template <typename Row>
  double score_one(const Row& row) const {
    const double l0 = joint_log_likelihood(row, 0);
    const double l1 = joint_log_likelihood(row, 1);
    if (std::isinf(l0) && l0 < 0) return 1.0;
    if (std::isinf(l1) && l1 < 0) return 0.0;
    return sigmoid(l1 - l0);
  }

  Vector score(const Matrix& x) const {
    Vector s(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) s(i) = score_one(x.row(i));
    return s;
  }

  const Vector& mean(int c) const { return mean_[c]; }
  const Vector& variance(int c) const { return var_[c]; }
  double log_prior(int c) const { return log_prior_[c]; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    for (int c = 0; c < 2; ++c) {
      const std::string k = std::to_string(c);
      j["mean_" + k] = vector_to_json(mean_[c]);
      j["var_" + k] = vector_to_json(var_[c]);
      // JSON has no infinity; an absent class is stored as null.
      j["log_prior_" + k] = std::isinf(log_prior_[c]) ? nlohmann::json(nullptr) : nlohmann::json(log_prior_[c]);
    }
    return j;
  }

  static GaussianNb from_json(const nlohmann::json& j) {
    GaussianNb m;
    for (int c = 0; c < 2; ++c) {
      const std::string k = std::to_string(c);
      m.mean_[c] = vector_from_json(j.at("mean_" + k));
      m.var_[c] = vector_from_json(j.at("var_" + k));
      const auto& lp = j.at("log_prior_" + k);
      m.log_prior_[c] = lp.is_null() ? -std::numeric_limits<double>::infinity() : lp.get<double>();
    }
    return m;
  }

 private:
  Vector mean_[2];
  Vector var_[2];
  double log_prior_[2] = {0.0, 0.0};
};

}  // namespace pfml::models
