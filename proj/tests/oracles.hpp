#pragma once

// Brute-force reference implementations shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "pfml/models/svm.hpp"
#include "pfml/models/tree.hpp"
#include "pfml/rng.hpp"

namespace oracle {

using pfml::models::Matrix;

inline double gini_of(const std::vector<int>& y, const std::vector<std::size_t>& rows) {
  if (rows.empty()) return 0.0;
  double p1 = 0.0;
  for (std::size_t r : rows) p1 += y[r];
  p1 /= static_cast<double>(rows.size());
  return 1.0 - p1 * p1 - (1.0 - p1) * (1.0 - p1);
}

/// Gini gain of an explicit partition (unit weights).
inline double partition_gain(const Matrix& x, const std::vector<int>& y, int feature, double threshold) {
  std::vector<std::size_t> all, left, right;
  for (std::size_t i = 0; i < y.size(); ++i) {
    all.push_back(i);
    (x(static_cast<Eigen::Index>(i), feature) <= threshold ? left : right).push_back(i);
  }
  const double n = static_cast<double>(y.size());
  return gini_of(y, all) - static_cast<double>(left.size()) / n * gini_of(y, left) -
         static_cast<double>(right.size()) / n * gini_of(y, right);
}

/// Largest gain over every feature and every threshold between two
/// consecutive distinct values; -1 when no split exists.
inline double best_gain(const Matrix& x, const std::vector<int>& y) {
  double best = -1.0;
  for (int f = 0; f < x.cols(); ++f) {
    std::set<double> vals;
    for (Eigen::Index i = 0; i < x.rows(); ++i) vals.insert(x(i, f));
    for (auto it = vals.begin(); std::next(it) != vals.end(); ++it)
      best = std::max(best, partition_gain(x, y, f, 0.5 * (*it + *std::next(it))));
  }
  return best;
}

/// Random dataset with up to `max_rows` rows and `max_cols` features drawn
/// from a small value alphabet so that ties occur.
inline std::pair<Matrix, std::vector<int>> random_small(pfml::Rng& rng, int max_rows, int max_cols) {
  const int n = 2 + static_cast<int>(pfml::uniform_index(rng, static_cast<std::size_t>(max_rows - 1)));
  const int d = 1 + static_cast<int>(pfml::uniform_index(rng, static_cast<std::size_t>(max_cols)));
  Matrix x(n, d);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = static_cast<double>(pfml::uniform_index(rng, 5)) * 0.25;
    y[static_cast<std::size_t>(i)] = static_cast<int>(pfml::uniform_index(rng, 2));
  }
  return {x, y};
}

struct KktReport {
  double worst = 0.0;       // largest KKT violation
  double equality = 0.0;    // |sum alpha_i y_i|
  bool box_ok = true;       // 0 <= alpha <= C
};

/// KKT conditions of the C-SVC dual at (alpha, bias).
inline KktReport kkt(const Matrix& gram, const std::vector<int>& y, const pfml::models::SmoResult& r, double c) {
  KktReport rep;
  const auto n = static_cast<Eigen::Index>(y.size());
  double eq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double yi = y[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
    double f = r.bias;
    for (Eigen::Index j = 0; j < n; ++j) f += r.alpha(j) * (y[static_cast<std::size_t>(j)] ? 1.0 : -1.0) * gram(j, i);
    const double m = yi * f;
    const double a = r.alpha(i);
    if (a < 0.0 || a > c) rep.box_ok = false;
    double v = 0.0;
    if (a <= 0.0) v = std::max(0.0, 1.0 - m);
    else if (a >= c) v = std::max(0.0, m - 1.0);
    else v = std::abs(m - 1.0);
    rep.worst = std::max(rep.worst, v);
    eq += a * yi;
  }
  rep.equality = std::abs(eq);
  return rep;
}

}  // namespace oracle
