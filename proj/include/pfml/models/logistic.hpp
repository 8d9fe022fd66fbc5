#pragma once

#include <cmath>
#include <vector>

#include "pfml/models/common.hpp"

namespace pfml::models {

struct LogisticParams {
  double l2 = -1.0;  // < 0 selects 1 / N
  double tol = 1e-6;
  int max_iter = 5000;
};

/// L2-regularized logistic regression; the intercept is not penalized.
class LogisticRegression {
 public:
  /// Mean negative log-likelihood plus (l2 / 2) * |w|^2, and its gradient
  /// with respect to (w, b) stacked as a vector of length d + 1.
  static double objective(const Matrix& x, const Vector& yv, const Vector& theta, double l2, Vector* grad) {
    const Eigen::Index d = x.cols();
    const auto w = theta.head(d);
    const double b = theta(d);
    const Vector z = (x * w).array() + b;
    const auto n = static_cast<double>(x.rows());
    double loss = 0.0;
    Vector resid(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      loss += softplus(z(i)) - yv(i) * z(i);
      resid(i) = sigmoid(z(i)) - yv(i);
    }
    loss = loss / n + 0.5 * l2 * w.squaredNorm();
    if (grad) {
      grad->resize(d + 1);
      grad->head(d) = x.transpose() * resid / n + l2 * w;
      (*grad)(d) = resid.sum() / n;
    }
    return loss;
  }

  /// Full-batch gradient descent with Armijo backtracking. `loss_trace`
  /// receives the objective after each accepted step.
  static LogisticRegression fit(const Matrix& x, Labels y, const LogisticParams& p = {},
                                std::vector<double>* loss_trace = nullptr) {
    check_training_set(x, y);
    const Eigen::Index d = x.cols();
    const double l2 = p.l2 < 0.0 ? 1.0 / static_cast<double>(x.rows()) : p.l2;
    Vector yv(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) yv(i) = y[static_cast<std::size_t>(i)];

    Vector theta = Vector::Zero(d + 1);
    Vector grad;
    double loss = objective(x, yv, theta, l2, &grad);
    if (loss_trace) loss_trace->push_back(loss);
    double step = 1.0;
    constexpr double kArmijo = 1e-4;
    for (int it = 0; it < p.max_iter; ++it) {
      if (grad.lpNorm<Eigen::Infinity>() < p.tol) break;
      const double g2 = grad.squaredNorm();
      Vector candidate;
      double cand_loss = 0.0;
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt) {
        candidate = theta - step * grad;
        cand_loss = objective(x, yv, candidate, l2, nullptr);
        if (cand_loss <= loss - kArmijo * step * g2) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      theta = std::move(candidate);
      loss = objective(x, yv, theta, l2, &grad);
      if (loss_trace) loss_trace->push_back(loss);
      step = std::min(step * 2.0, 1e6);
    }
    LogisticRegression m;
    m.w_ = theta.head(d);
    m.b_ = theta(d);
    return m;
  }

  template <typename Row>
  double decision(const Row& row) const {
    return row.dot(w_.transpose()) + b_;
  }

  template <typename Row>
  double score_one(const Row& row) const {
    return sigmoid(decision(row));
  }

  Vector score(const Matrix& x) const {
    Vector s = (x * w_).array() + b_;
    for (Eigen::Index i = 0; i < s.size(); ++i) s(i) = sigmoid(s(i));
    return s;
  }

  const Vector& weights() const noexcept { return w_; }
  double bias() const noexcept { return b_; }

  nlohmann::json to_json() const { return {{"w", vector_to_json(w_)}, {"b", b_}}; }

  static LogisticRegression from_json(const nlohmann::json& j) {
    LogisticRegression m;
    m.w_ = vector_from_json(j.at("w"));
    m.b_ = j.at("b").get<double>();
    return m;
  }

 private:
  Vector w_;
  double b_ = 0.0;
};

}  // namespace pfml::models
