#pragma once

// One-hidden-layer perceptron: ReLU hidden units, sigmoid output,
// binary cross-entropy, plain mini-batch gradient descent.

#include <cmath>
#include <numeric>
#include <vector>

#include "pfml/models/common.hpp"
#include "pfml/rng.hpp"

namespace pfml::models {

struct MlpParams {
  int hidden = 100;
  double learning_rate = 1e-3;
  int epochs = 200;
  int batch_size = 32;
};

struct MlpWeights {
  Matrix w1;  // hidden x inputs
  Vector b1;  // hidden
  Vector w2;  // hidden
  double b2 = 0.0;

  Eigen::Index parameter_count() const { return w1.size() + b1.size() + w2.size() + 1; }

  /// Flattened as [w1 row-major, b1, w2, b2].
  Vector flatten() const {
    Vector v(parameter_count());
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < w1.rows(); ++r)
      for (Eigen::Index c = 0; c < w1.cols(); ++c) v(k++) = w1(r, c);
    for (Eigen::Index i = 0; i < b1.size(); ++i) v(k++) = b1(i);
    for (Eigen::Index i = 0; i < w2.size(); ++i) v(k++) = w2(i);
    v(k) = b2;
    return v;
  }

  void unflatten(const Vector& v) {
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < w1.rows(); ++r)
      for (Eigen::Index c = 0; c < w1.cols(); ++c) w1(r, c) = v(k++);
    for (Eigen::Index i = 0; i < b1.size(); ++i) b1(i) = v(k++);
    for (Eigen::Index i = 0; i < w2.size(); ++i) w2(i) = v(k++);
    b2 = v(k);
  }

  /// Xavier-uniform weights, zero biases.
  static MlpWeights xavier(Eigen::Index inputs, Eigen::Index hidden, Rng& rng) {
    MlpWeights m;
    m.w1.resize(hidden, inputs);
    m.b1 = Vector::Zero(hidden);
    m.w2.resize(hidden);
    const double lim1 = std::sqrt(6.0 / static_cast<double>(inputs + hidden));
    const double lim2 = std::sqrt(6.0 / static_cast<double>(hidden + 1));
    for (Eigen::Index r = 0; r < hidden; ++r)
      for (Eigen::Index c = 0; c < inputs; ++c) m.w1(r, c) = (2.0 * uniform01(rng) - 1.0) * lim1;
    for (Eigen::Index r = 0; r < hidden; ++r) m.w2(r) = (2.0 * uniform01(rng) - 1.0) * lim2;
    return m;
  }
};

/// Output probabilities for every row of x.
inline Vector mlp_forward(const MlpWeights& m, const Matrix& x) {
  const Matrix h = ((x * m.w1.transpose()).rowwise() + m.b1.transpose()).cwiseMax(0.0);
  Vector z = (h * m.w2).array() + m.b2;
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = sigmoid(z(i));
  return z;
}

/// Mean cross-entropy over the rows and its gradient (same layout as
/// MlpWeights::flatten).
inline double mlp_loss_and_gradient(const MlpWeights& m, const Matrix& x, const Vector& y, MlpWeights* grad) {
  const auto n = static_cast<double>(x.rows());
  const Matrix pre = (x * m.w1.transpose()).rowwise() + m.b1.transpose();
  const Matrix h = pre.cwiseMax(0.0);
  const Vector z = (h * m.w2).array() + m.b2;
  double loss = 0.0;
  Vector dz(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    loss += y(i) * softplus(-z(i)) + (1.0 - y(i)) * softplus(z(i));
    dz(i) = (sigmoid(z(i)) - y(i)) / n;
  }
  loss /= n;
  if (grad) {
    grad->w2 = h.transpose() * dz;
    grad->b2 = dz.sum();
    Matrix dh = dz * m.w2.transpose();
    dh = dh.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
    grad->w1 = dh.transpose() * x;
    grad->b1 = dh.colwise().sum().transpose();
  }
  return loss;
}

class Mlp {
 public:
  static Mlp fit(const Matrix& x, Labels y, const MlpParams& p, std::uint64_t seed) {
    check_training_set(x, y);
    if (p.hidden < 1 || p.batch_size < 1 || p.epochs < 0) throw Error("invalid perceptron shape");
    Rng rng = make_rng(derive_seed(seed, "mlp"));
    Mlp model;
    model.w_ = MlpWeights::xavier(x.cols(), p.hidden, rng);
    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    MlpWeights g;
    Matrix xb;
    Vector yb;
    for (int epoch = 0; epoch < p.epochs; ++epoch) {
      shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(p.batch_size)) {
        const std::size_t end = std::min(n, start + static_cast<std::size_t>(p.batch_size));
        const auto b = static_cast<Eigen::Index>(end - start);
        xb.resize(b, x.cols());
        yb.resize(b);
        for (Eigen::Index k = 0; k < b; ++k) {
          const Eigen::Index r = order[start + static_cast<std::size_t>(k)];
          xb.row(k) = x.row(r);
          yb(k) = y[static_cast<std::size_t>(r)];
        }
        mlp_loss_and_gradient(model.w_, xb, yb, &g);
        model.w_.w1 -= p.learning_rate * g.w1;
        model.w_.b1 -= p.learning_rate * g.b1;
        model.w_.w2 -= p.learning_rate * g.w2;
        model.w_.b2 -= p.learning_rate * g.b2;
      }
    }
    return model;
  }

  static Mlp from_weights(MlpWeights w) {
    Mlp m;
    m.w_ = std::move(w);
    return m;
  }

  Vector score(const Matrix& x) const { return mlp_forward(w_, x); }

  template <typename Row>
  double score_one(const Row& row) const {
    return mlp_forward(w_, Matrix(row))(0);
  }

  const MlpWeights& weights() const noexcept { return w_; }

  nlohmann::json to_json() const {
    return {{"w1", matrix_to_json(w_.w1)}, {"b1", vector_to_json(w_.b1)}, {"w2", vector_to_json(w_.w2)}, {"b2", w_.b2}};
  }

  static Mlp from_json(const nlohmann::json& j) {
    MlpWeights w;
    w.w1 = matrix_from_json(j.at("w1"));
    w.b1 = vector_from_json(j.at("b1"));
    w.w2 = vector_from_json(j.at("w2"));
    w.b2 = j.at("b2").get<double>();
    if (w.b1.size() != w.w1.rows() || w.w2.size() != w.w1.rows()) throw Error("perceptron weight shapes disagree");
    return from_weights(std::move(w));
  }

 private:
  MlpWeights w_;
};

}  // namespace pfml::models
