#pragma once

// Geometric calibration, cleaning and resampling of raw sensor frames.
// Every function here is pure: inputs are never modified.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pfml/error.hpp"
#include "pfml/image.hpp"

namespace pfml {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Correspondence {
  Point2 src;
  Point2 dst;
};

struct PixelCoord {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const PixelCoord&, const PixelCoord&) = default;
};

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
};

struct RegionSpec {
  std::string coupon_id;
  Rect rect;
};

/// 3x3 projective map, stored row-major and normalized so m[2][2] == 1.
class Homography {
 public:
  Homography() : m_{1, 0, 0, 0, 1, 0, 0, 0, 1} {}

  explicit Homography(const std::array<double, 9>& m) : m_(m) {
    if (std::abs(m_[8]) < 1e-15) throw Error("singular homography");
    const double s = m_[8];
    for (double& v : m_) v /= s;
    if (std::abs(determinant()) <= 1e-12) throw Error("singular homography");
  }

  static Homography identity() { return Homography{}; }

  static Homography translation(double tx, double ty) {
    return Homography({1, 0, tx, 0, 1, ty, 0, 0, 1});
  }

  double operator()(int r, int c) const { return m_[static_cast<std::size_t>(3 * r + c)]; }
  const std::array<double, 9>& matrix() const noexcept { return m_; }

  double determinant() const {
    const auto& a = m_;
    return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) +
           a[2] * (a[3] * a[7] - a[4] * a[6]);
  }

  Point2 apply(Point2 p) const {
    const auto& a = m_;
    const double w = a[6] * p.x + a[7] * p.y + a[8];
    return {(a[0] * p.x + a[1] * p.y + a[2]) / w, (a[3] * p.x + a[4] * p.y + a[5]) / w};
  }

  Homography inverse() const {
    const auto& a = m_;
    const double det = determinant();
    if (std::abs(det) <= 1e-12) throw Error("singular homography");
    std::array<double, 9> inv{
        (a[4] * a[8] - a[5] * a[7]), -(a[1] * a[8] - a[2] * a[7]), (a[1] * a[5] - a[2] * a[4]),
        -(a[3] * a[8] - a[5] * a[6]), (a[0] * a[8] - a[2] * a[6]), -(a[0] * a[5] - a[2] * a[3]),
        (a[3] * a[7] - a[4] * a[6]), -(a[0] * a[7] - a[1] * a[6]), (a[0] * a[4] - a[1] * a[3])};
    for (double& v : inv) v /= det;
    return Homography(inv);
  }

 private:
  std::array<double, 9> m_;
};

namespace detail {

// Similarity transform moving the centroid to the origin and the mean
// distance from it to sqrt(2).
inline Eigen::Matrix3d hartley_normalizer(std::span<const Point2> pts) {
  double cx = 0.0, cy = 0.0;
  for (const auto& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(pts.size());
  cy /= static_cast<double>(pts.size());
  double mean_dist = 0.0;
  for (const auto& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
  mean_dist /= static_cast<double>(pts.size());
  const double s = mean_dist > 0.0 ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  return t;
}

inline double median_inplace(std::span<double> v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

inline void require_odd_window(int k) {
  if (k % 2 == 0) throw Error("window size must be odd");
  if (k < 3) throw Error("window size must be at least 3");
}

// Collects the in-bounds k x k neighbourhood of (x, y) into `out`.
inline void gather_window(const GrayImage& img, int x, int y, int k, std::vector<double>& out) {
  const int r = k / 2;
  out.clear();
  const int y0 = std::max(0, y - r), y1 = std::min(img.height() - 1, y + r);
  const int x0 = std::max(0, x - r), x1 = std::min(img.width() - 1, x + r);
  for (int yy = y0; yy <= y1; ++yy)
    for (int xx = x0; xx <= x1; ++xx) out.push_back(img.at(xx, yy));
}

}  // namespace detail

/// Median of a sample; even counts average the two middle order statistics.
inline double median_of(std::vector<double> values) {
  if (values.empty()) throw Error("median of empty sample");
  return detail::median_inplace(values);
}

/// Normalized direct linear transform over >= 4 point correspondences.
inline Homography estimate_homography(std::span<const Correspondence> corr) {
  if (corr.size() < 4) throw Error("insufficient correspondences");
  std::vector<Point2> src, dst;
  src.reserve(corr.size());
  dst.reserve(corr.size());
  for (const auto& c : corr) {
    src.push_back(c.src);
    dst.push_back(c.dst);
  }
  const Eigen::Matrix3d ts = detail::hartley_normalizer(src);
  const Eigen::Matrix3d td = detail::hartley_normalizer(dst);

  const auto n = static_cast<Eigen::Index>(corr.size());
  Eigen::MatrixXd a(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = src[static_cast<std::size_t>(i)];
    const auto& d = dst[static_cast<std::size_t>(i)];
    const Eigen::Vector3d p = ts * Eigen::Vector3d(s.x, s.y, 1.0);
    const Eigen::Vector3d q = td * Eigen::Vector3d(d.x, d.y, 1.0);
    const double x = p.x() / p.z(), y = p.y() / p.z();
    const double u = q.x() / q.z(), v = q.y() / q.z();
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  // A square system is padded so that the SVD exposes all nine singular values.
  if (a.rows() < 9) {
    Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(9, 9);
    padded.topRows(a.rows()) = a;
    a = std::move(padded);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (sv(0) <= 0.0 || sv(7) <= 1e-10 * sv(0)) throw Error("degenerate calibration");
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Eigen::Matrix3d full = td.inverse() * hn * ts;
  if (std::abs(full(2, 2)) < 1e-15) throw Error("degenerate calibration");
  std::array<double, 9> m{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m[static_cast<std::size_t>(3 * r + c)] = full(r, c);
  try {
    return Homography(m);
  } catch (const Error&) {
    throw Error("degenerate calibration");
  }
}

/// Bilinear sample at a real-valued position; positions outside the
/// pixel-centre hull map to 0.
inline double sample_bilinear(const GrayImage& img, double x, double y) {
  constexpr double eps = 1e-9;
  if (x < -eps || y < -eps || x > img.width() - 1 + eps || y > img.height() - 1 + eps) return 0.0;
  x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = x - x0, fy = y - y0;
  const double top = img.at(x0, y0) * (1 - fx) + img.at(x1, y0) * fx;
  const double bot = img.at(x0, y1) * (1 - fx) + img.at(x1, y1) * fx;
  return top * (1 - fy) + bot * fy;
}

/// Resamples `img` into the target frame of `h` (source -> overhead).
/// Pixel (x, y) of the output is read from h^-1 (x, y) in the source.
inline GrayImage warp_to_overhead(const GrayImage& img, const Homography& h, int out_w, int out_h) {
  const Homography inv = h.inverse();
  GrayImage out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const Point2 s = inv.apply({static_cast<double>(x), static_cast<double>(y)});
      out.at(x, y) = std::clamp(sample_bilinear(img, s.x, s.y), 0.0, 1.0);
    }
  }
  return out;
}

/// Replaces defective pixels by the median of their k x k neighbourhood.
///
/// With a mask, exactly the listed pixels are replaced and other masked
/// pixels are excluded from each median. Without one, a pixel is flagged
/// when |p - median| > 6 * MAD over its window; flagged pixels are then
/// replaced the same way. A pixel whose whole window is masked is kept.
inline GrayImage clean_hot_pixels(const GrayImage& img,
                                  std::optional<std::span<const PixelCoord>> hot_mask = std::nullopt,
                                  int k = 3) {
  detail::require_odd_window(k);
  const int w = img.width(), h = img.height();
  std::vector<char> flagged(img.size(), 0);
  if (hot_mask) {
    for (const auto& p : *hot_mask)
      if (img.contains(p.x, p.y)) flagged[static_cast<std::size_t>(p.y) * w + p.x] = 1;
  } else {
    constexpr double kMadThreshold = 6.0;
    std::vector<double> win;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        detail::gather_window(img, x, y, k, win);
        const double med = detail::median_inplace(win);
        for (double& v : win) v = std::abs(v - med);
        const double mad = detail::median_inplace(win);
        if (std::abs(img.at(x, y) - med) > kMadThreshold * mad)
          flagged[static_cast<std::size_t>(y) * w + x] = 1;
      }
    }
  }

  GrayImage out = img;
  const int r = k / 2;
  std::vector<double> win;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!flagged[static_cast<std::size_t>(y) * w + x]) continue;
      win.clear();
      for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy)
        for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx)
          if (!flagged[static_cast<std::size_t>(yy) * w + xx]) win.push_back(img.at(xx, yy));
      if (!win.empty()) out.at(x, y) = detail::median_inplace(win);
    }
  }
  return out;
}

/// Median over the in-bounds k x k neighbourhood of every pixel.
inline GrayImage median_filter(const GrayImage& img, int k) {
  detail::require_odd_window(k);
  GrayImage out(img.width(), img.height());
  std::vector<double> win;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      detail::gather_window(img, x, y, k, win);
      out.at(x, y) = detail::median_inplace(win);
    }
  }
  return out;
}

/// Adaptive local-statistics Wiener filter:
///   out = mu + max(var - noise, 0) / max(var, 1e-12) * (p - mu)
/// with mu, var taken over the in-bounds k x k window. When `noise_var` is
/// absent the mean of all local variances is used.
inline GrayImage wiener_deblur(const GrayImage& img, int k = 5, std::optional<double> noise_var = std::nullopt) {
  detail::require_odd_window(k);
  if (noise_var && *noise_var < 0.0) throw Error("noise variance must be non-negative");
  const int w = img.width(), h = img.height(), r = k / 2;
  std::vector<double> mean(img.size()), var(img.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0, s2 = 0.0;
      int n = 0;
      for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy) {
        for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx) {
          const double v = img.at(xx, yy);
          s += v;
          s2 += v * v;
          ++n;
        }
      }
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      mean[i] = s / n;
      var[i] = std::max(0.0, s2 / n - mean[i] * mean[i]);
    }
  }
  double noise = 0.0;
  if (noise_var) {
    noise = *noise_var;
  } else {
    for (double v : var) noise += v;
    noise /= static_cast<double>(var.size());
  }
  constexpr double eps = 1e-12;
  GrayImage out(w, h);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double gain = std::max(var[i] - noise, 0.0) / std::max(var[i], eps);
    out.pixels()[i] = std::clamp(mean[i] + gain * (img.pixels()[i] - mean[i]), 0.0, 1.0);
  }
  return out;
}

/// Histogram equalization over `bins` quantization levels.
///
/// Level of a pixel is round(v * (bins - 1)); each level maps to
/// (CDF(level) - CDF_min) / (1 - CDF_min) where CDF_min is the smallest
/// non-zero CDF value. A constant image therefore maps to all zeros.
inline GrayImage equalize_histogram(const GrayImage& img, int bins = 256) {
  if (bins < 2) throw Error("histogram needs at least 2 bins");
  std::vector<int> level(img.size());
  std::vector<double> cdf(static_cast<std::size_t>(bins), 0.0);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = std::clamp(img.pixels()[i], 0.0, 1.0);
    level[i] = static_cast<int>(std::lround(v * (bins - 1)));
    cdf[static_cast<std::size_t>(level[i])] += 1.0;
  }
  const double n = static_cast<double>(img.size());
  double acc = 0.0;
  for (double& c : cdf) {
    acc += c;
    c = acc / n;
  }
  double cdf_min = 1.0;
  for (double c : cdf)
    if (c > 0.0) {
      cdf_min = c;
      break;
    }
  GrayImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double c = cdf[static_cast<std::size_t>(level[i])];
    out.pixels()[i] = cdf_min >= 1.0 ? 0.0 : std::clamp((c - cdf_min) / (1.0 - cdf_min), 0.0, 1.0);
  }
  return out;
}

/// Pixel-exact copy of a sub-rectangle.
inline GrayImage crop(const GrayImage& img, const Rect& r) {
  GrayImage out(r.w, r.h);
  for (int y = 0; y < r.h; ++y)
    for (int x = 0; x < r.w; ++x) out.at(x, y) = img.at(r.x + x, r.y + y);
  return out;
}

inline bool rect_in_bounds(const GrayImage& img, const Rect& r) {
  return r.w >= 1 && r.h >= 1 && r.x >= 0 && r.y >= 0 && r.x + r.w <= img.width() &&
         r.y + r.h <= img.height();
}

inline std::vector<std::pair<std::string, GrayImage>> crop_regions(const GrayImage& img,
                                                                   std::span<const RegionSpec> regions) {
  std::vector<std::pair<std::string, GrayImage>> out;
  out.reserve(regions.size());
  for (const auto& reg : regions) {
    if (!rect_in_bounds(img, reg.rect))
      throw Error("region for coupon '" + reg.coupon_id + "' lies outside the image");
    out.emplace_back(reg.coupon_id, crop(img, reg.rect));
  }
  return out;
}

/// Lanczos kernel with a = 4. Integer arguments return exact 0/1 so that
/// unit-scale resampling reduces to the identity tap.
inline double lanczos4_kernel(double x) {
  constexpr double a = 4.0;
  if (x == 0.0) return 1.0;
  const double ax = std::abs(x);
  if (ax >= a) return 0.0;
  if (ax == std::floor(ax)) return 0.0;
  const double px = std::numbers::pi * x;
  return a * std::sin(px) * std::sin(px / a) / (px * px);
}

namespace detail {

struct LanczosTaps {
  std::array<int, 8> index{};
  std::array<double, 8> weight{};
};

// Taps for one output coordinate: source centre (dst + 0.5) * scale - 0.5,
// eight neighbours floor(src) - 3 .. floor(src) + 4, clamped indices,
// weights normalized to sum to one.
inline std::vector<LanczosTaps> lanczos_axis(int in_size, int out_size) {
  const double scale = static_cast<double>(in_size) / out_size;
  std::vector<LanczosTaps> taps(static_cast<std::size_t>(out_size));
  for (int d = 0; d < out_size; ++d) {
    const double src = (d + 0.5) * scale - 0.5;
    const int base = static_cast<int>(std::floor(src));
    auto& t = taps[static_cast<std::size_t>(d)];
    double sum = 0.0;
    for (int k = 0; k < 8; ++k) {
      const int i = base - 3 + k;
      t.index[static_cast<std::size_t>(k)] = std::clamp(i, 0, in_size - 1);
      t.weight[static_cast<std::size_t>(k)] = lanczos4_kernel(src - i);
      sum += t.weight[static_cast<std::size_t>(k)];
    }
    for (double& wgt : t.weight) wgt /= sum;
  }
  return taps;
}

}  // namespace detail

/// Separable Lanczos4 resampling to out_w x out_h, output clamped to [0, 1].
inline GrayImage resample_lanczos4(const GrayImage& img, int out_w = 64, int out_h = 64) {
  if (out_w < 1 || out_h < 1) throw Error("output dimensions must be at least 1x1");
  if (img.empty()) throw Error("cannot resample an empty image");
  const auto tx = detail::lanczos_axis(img.width(), out_w);
  const auto ty = detail::lanczos_axis(img.height(), out_h);
  // Horizontal pass into an out_w x in_h buffer, then vertical.
  std::vector<double> tmp(static_cast<std::size_t>(out_w) * img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < out_w; ++x) {
      const auto& t = tx[static_cast<std::size_t>(x)];
      double acc = 0.0;
      for (std::size_t k = 0; k < 8; ++k) acc += t.weight[k] * img.at(t.index[k], y);
      tmp[static_cast<std::size_t>(y) * out_w + x] = acc;
    }
  }
  GrayImage out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    const auto& t = ty[static_cast<std::size_t>(y)];
    for (int x = 0; x < out_w; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 8; ++k)
        acc += t.weight[k] * tmp[static_cast<std::size_t>(t.index[k]) * out_w + x];
      out.at(x, y) = std::clamp(acc, 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace pfml
