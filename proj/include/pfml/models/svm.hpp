#pragma once

// Soft-margin C-SVC trained by SMO with second-order working-set
// selection, plus a one-parameter logistic map of the decision value.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "pfml/models/common.hpp"

namespace pfml::models {

enum class KernelType { kLinear, kPoly, kRbf };

struct Kernel {
  KernelType type = KernelType::kRbf;
  double gamma = 1.0;
  double degree = 3.0;
  double coef0 = 0.0;

  template <typename A, typename B>
  double operator()(const A& a, const B& b) const {
    switch (type) {
      case KernelType::kLinear: return a.dot(b);
      case KernelType::kPoly: return std::pow(gamma * a.dot(b) + coef0, degree);
      case KernelType::kRbf: return std::exp(-gamma * (a - b).squaredNorm());
    }
    return 0.0;
  }
};

inline std::string kernel_name(KernelType t) {
  switch (t) {
    case KernelType::kLinear: return "linear";
    case KernelType::kPoly: return "poly";
    case KernelType::kRbf: return "rbf";
  }
  return "";
}

inline KernelType kernel_from_name(const std::string& s) {
  if (s == "linear") return KernelType::kLinear;
  if (s == "poly") return KernelType::kPoly;
  if (s == "rbf") return KernelType::kRbf;
  throw Error("unknown kernel '" + s + "'");
}

/// 1 / (n_features * mean per-feature variance); 1 when the data is constant.
inline double auto_gamma(const Matrix& x) {
  if (x.rows() == 0 || x.cols() == 0) return 1.0;
  double total = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double mu = x.col(j).mean();
    total += (x.col(j).array() - mu).square().mean();
  }
  const double mean_var = total / static_cast<double>(x.cols());
  return mean_var > 0.0 ? 1.0 / (static_cast<double>(x.cols()) * mean_var) : 1.0;
}

inline Matrix gram_matrix(const Matrix& x, const Kernel& k) {
  const Eigen::Index n = x.rows();
  Matrix g(n, n);
  if (k.type == KernelType::kLinear || k.type == KernelType::kPoly) {
    g.noalias() = x * x.transpose();
    if (k.type == KernelType::kPoly)
      g = (k.gamma * g.array() + k.coef0).pow(k.degree).matrix();
  } else {
    const Vector sq = x.rowwise().squaredNorm();
    g.noalias() = x * x.transpose();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        g(i, j) = std::exp(-k.gamma * std::max(0.0, sq(i) + sq(j) - 2.0 * g(i, j)));
  }
  return g;
}

struct SmoParams {
  double c = 1.0;
  double tol = 1e-3;
  double max_passes = 1e4;  // iteration cap = max_passes * n
};

struct SmoResult {
  Vector alpha;
  double bias = 0.0;  // f(x) = sum_i alpha_i y_i K(x_i, x) + bias
  long iterations = 0;
  bool converged = false;
};

/// Solves min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0 with Q_ij = y_i y_j K_ij.
inline SmoResult solve_smo(const Matrix& gram, Labels y, const SmoParams& p) {
  const Eigen::Index n = gram.rows();
  Vector ys(n);
  for (Eigen::Index i = 0; i < n; ++i) ys(i) = y[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
  Vector alpha = Vector::Zero(n);
  Vector grad = Vector::Constant(n, -1.0);
  const double c = p.c;
  constexpr double kTau = 1e-12;
  const long max_iter = static_cast<long>(std::max(1.0, p.max_passes * static_cast<double>(n)));

  auto in_up = [&](Eigen::Index t) { return (ys(t) > 0 && alpha(t) < c) || (ys(t) < 0 && alpha(t) > 0); };
  auto in_low = [&](Eigen::Index t) { return (ys(t) > 0 && alpha(t) > 0) || (ys(t) < 0 && alpha(t) < c); };

  SmoResult res;
  for (; res.iterations < max_iter; ++res.iterations) {
    Eigen::Index i = -1;
    double gmax = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (in_up(t) && -ys(t) * grad(t) > gmax) {
        i = t;
        gmax = -ys(t) * grad(t);
      }
    }
    double gmin = std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    double best_obj = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -ys(t) * grad(t);
      gmin = std::min(gmin, v);
      if (i < 0) continue;
      const double b = gmax - v;
      if (b > 0) {
        double a = gram(i, i) + gram(t, t) - 2.0 * gram(i, t);
        if (a <= 0) a = kTau;
        const double obj = -(b * b) / a;
        if (obj < best_obj) {
          best_obj = obj;
          j = t;
        }
      }
    }
    if (i < 0 || j < 0 || gmax - gmin < p.tol) {
      res.converged = true;
      break;
    }

    // Analytic two-variable update (Fan, Chen & Lin, 2005).
    const double old_ai = alpha(i), old_aj = alpha(j);
    const double qii = gram(i, i), qjj = gram(j, j), qij = ys(i) * ys(j) * gram(i, j);
    if (ys(i) != ys(j)) {
      double quad = qii + qjj + 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0) {
        if (alpha(j) < 0) {
          alpha(j) = 0;
          alpha(i) = diff;
        }
      } else if (alpha(i) < 0) {
        alpha(i) = 0;
        alpha(j) = -diff;
      }
      if (diff > 0) {
        if (alpha(i) > c) {
          alpha(i) = c;
          alpha(j) = c - diff;
        }
      } else if (alpha(j) > c) {
        alpha(j) = c;
        alpha(i) = c + diff;
      }
    } else {
      double quad = qii + qjj - 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > c) {
        if (alpha(i) > c) {
          alpha(i) = c;
          alpha(j) = sum - c;
        }
      } else if (alpha(j) < 0) {
        alpha(j) = 0;
        alpha(i) = sum;
      }
      if (sum > c) {
        if (alpha(j) > c) {
          alpha(j) = c;
          alpha(i) = sum - c;
        }
      } else if (alpha(i) < 0) {
        alpha(i) = 0;
        alpha(j) = sum;
      }
    }
    const double dai = alpha(i) - old_ai, daj = alpha(j) - old_aj;
    for (Eigen::Index t = 0; t < n; ++t)
      grad(t) += ys(t) * (ys(i) * gram(t, i) * dai + ys(j) * gram(t, j) * daj);
  }

  // Bias from free vectors, or the midpoint of the feasible interval.
  double sum_free = 0.0;
  int n_free = 0;
  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = ys(t) * grad(t);
    if (alpha(t) >= c) {
      if (ys(t) < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha(t) <= 0) {
      if (ys(t) > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
  res.alpha = std::move(alpha);
  res.bias = -rho;
  return res;
}

struct SvmParams {
  Kernel kernel;
  SmoParams smo;
};

/// Kernel SVM. score = sigmoid(A * f(x)) with A > 0 fitted on the training
/// decision values, so score >= 0.5 exactly when f(x) >= 0.
class Svm {
 public:
  static Svm fit(const Matrix& x, Labels y, const SvmParams& p, SmoResult* smo_out = nullptr) {
    const std::size_t pos = check_training_set(x, y);
    if (single_class(pos, y.size())) throw Error("degenerate labels");
    const Matrix gram = gram_matrix(x, p.kernel);
    SmoResult r = solve_smo(gram, y, p.smo);

    Svm m;
    m.kernel_ = p.kernel;
    m.bias_ = r.bias;
    std::vector<Eigen::Index> sv;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (r.alpha(i) > 0) sv.push_back(i);
    m.support_.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
    m.coef_.resize(static_cast<Eigen::Index>(sv.size()));
    for (std::size_t k = 0; k < sv.size(); ++k) {
      const auto i = sv[k];
      m.support_.row(static_cast<Eigen::Index>(k)) = x.row(i);
      m.coef_(static_cast<Eigen::Index>(k)) = r.alpha(i) * (y[static_cast<std::size_t>(i)] ? 1.0 : -1.0);
    }

    Vector f(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double s = r.bias;
      for (Eigen::Index t = 0; t < x.rows(); ++t)
        if (r.alpha(t) > 0) s += r.alpha(t) * (y[static_cast<std::size_t>(t)] ? 1.0 : -1.0) * gram(t, i);
      f(i) = s;
    }
    m.scale_ = fit_calibration(f, y);
    if (smo_out) *smo_out = std::move(r);
    return m;
  }

  /// Fits A in sigmoid(A f) by Newton's method on the cross-entropy against
  /// Platt's smoothed targets; A is kept strictly positive.
  static double fit_calibration(const Vector& f, Labels y) {
    double n_pos = 0, n_neg = 0;
    for (int v : y) (v ? n_pos : n_neg) += 1.0;
    const double t_pos = (n_pos + 1.0) / (n_pos + 2.0), t_neg = 1.0 / (n_neg + 2.0);
    constexpr double kMin = 1e-6, kMax = 1e6;
    double a = 1.0;
    auto loss = [&](double av) {
      double l = 0.0;
      for (Eigen::Index i = 0; i < f.size(); ++i) {
        const double t = y[static_cast<std::size_t>(i)] ? t_pos : t_neg;
        const double z = av * f(i);
        l += t * softplus(-z) + (1 - t) * softplus(z);
      }
      return l;
    };
    double cur = loss(a);
    for (int it = 0; it < 100; ++it) {
      double g = 0.0, h = 0.0;
      for (Eigen::Index i = 0; i < f.size(); ++i) {
        const double t = y[static_cast<std::size_t>(i)] ? t_pos : t_neg;
        const double p = sigmoid(a * f(i));
        g += (p - t) * f(i);
        h += p * (1 - p) * f(i) * f(i);
      }
      if (std::abs(g) < 1e-10) break;
      double step = h > 1e-12 ? g / h : (g > 0 ? 0.5 * a : -a);
      double next = std::clamp(a - step, kMin, kMax);
      double next_loss = loss(next);
      for (int bt = 0; bt < 40 && next_loss > cur; ++bt) {
        step *= 0.5;
        next = std::clamp(a - step, kMin, kMax);
        next_loss = loss(next);
      }
      if (next_loss > cur || std::abs(next - a) < 1e-12 * std::max(1.0, a)) break;
      a = next;
      cur = next_loss;
    }
    return a;
  }

  template <typename Row>
  double decision(const Row& row) const {
    double s = bias_;
    for (Eigen::Index k = 0; k < support_.rows(); ++k) s += coef_(k) * kernel_(support_.row(k), row);
    return s;
  }

  template <typename Row>
  double score_one(const Row& row) const {
    return sigmoid(scale_ * decision(row));
  }

  Vector score(const Matrix& x) const {
    Vector s(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) s(i) = score_one(x.row(i));
    return s;
  }

  const Kernel& kernel() const noexcept { return kernel_; }
  double calibration_scale() const noexcept { return scale_; }
  Eigen::Index support_count() const noexcept { return support_.rows(); }

  nlohmann::json to_json() const {
    return {{"kernel", kernel_name(kernel_.type)},
            {"gamma", kernel_.gamma},
            {"degree", kernel_.degree},
            {"coef0", kernel_.coef0},
            {"bias", bias_},
            {"calibration_scale", scale_},
            {"support_vectors", matrix_to_json(support_)},
            {"dual_coef", vector_to_json(coef_)}};
  }

  static Svm from_json(const nlohmann::json& j) {
    Svm m;
    m.kernel_.type = kernel_from_name(j.at("kernel").get<std::string>());
    m.kernel_.gamma = j.at("gamma").get<double>();
    m.kernel_.degree = j.at("degree").get<double>();
    m.kernel_.coef0 = j.at("coef0").get<double>();
    m.bias_ = j.at("bias").get<double>();
    m.scale_ = j.at("calibration_scale").get<double>();
    m.support_ = matrix_from_json(j.at("support_vectors"));
    m.coef_ = vector_from_json(j.at("dual_coef"));
    if (m.coef_.size() != m.support_.rows()) throw Error("support vector count mismatch");
    return m;
  }

 private:
  Kernel kernel_;
  Matrix support_;
  Vector coef_;
  double bias_ = 0.0;
  double scale_ = 1.0;
};

}  // namespace pfml::models
