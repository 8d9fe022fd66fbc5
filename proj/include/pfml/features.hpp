#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pfml/error.hpp"
#include "pfml/image.hpp"
#include "pfml/imaging.hpp"

namespace pfml {

/// Six intensity statistics of one processed region.
///
/// `roughness` is the areal roughness Sa applied to intensity: the mean
/// absolute deviation from the average. `std` is the population standard
/// deviation (Rq), so roughness <= std always holds.
struct StatBlock {
  double avg = 0.0;
  double median = 0.0;
  double max = 0.0;
  double min = 0.0;
  double std = 0.0;
  double roughness = 0.0;

  static constexpr std::size_t kCount = 6;
  static constexpr std::array<std::string_view, kCount> kNames{"avg", "median", "max", "min", "std", "roughness"};

  std::array<double, kCount> values() const { return {avg, median, max, min, std, roughness}; }

  static StatBlock from_values(const std::array<double, kCount>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5]};
  }

  friend bool operator==(const StatBlock&, const StatBlock&) = default;
};

enum class Channel { kTomo = 0, kPsAop, kPsDolp, kPmAop, kPmDolp };

inline constexpr std::array<Channel, 5> kAllChannels{Channel::kTomo, Channel::kPsAop, Channel::kPsDolp,
                                                     Channel::kPmAop, Channel::kPmDolp};

/// Short key used in file names ("tomo", "ps_aop", ...).
constexpr std::string_view channel_key(Channel c) {
  switch (c) {
    case Channel::kTomo: return "tomo";
    case Channel::kPsAop: return "ps_aop";
    case Channel::kPsDolp: return "ps_dolp";
    case Channel::kPmAop: return "pm_aop";
    case Channel::kPmDolp: return "pm_dolp";
  }
  return "";
}

/// Prefix of the canonical feature names.
constexpr std::string_view channel_label(Channel c) {
  switch (c) {
    case Channel::kTomo: return "Tomography";
    case Channel::kPsAop: return "Polarimetry post spread AoP";
    case Channel::kPsDolp: return "Polarimetry post spread DoLP";
    case Channel::kPmAop: return "Polarimetry post melt AoP";
    case Channel::kPmDolp: return "Polarimetry post melt DoLP";
  }
  return "";
}

inline std::optional<Channel> channel_from_key(std::string_view key) {
  for (Channel c : kAllChannels)
    if (channel_key(c) == key) return c;
  return std::nullopt;
}

/// The 30 in-situ statistics of one coupon-layer.
struct LayerFeatures {
  StatBlock tomo;
  StatBlock ps_aop;
  StatBlock ps_dolp;
  StatBlock pm_aop;
  StatBlock pm_dolp;

  static constexpr std::size_t kCount = 30;

  const StatBlock& block(Channel c) const {
    switch (c) {
      case Channel::kTomo: return tomo;
      case Channel::kPsAop: return ps_aop;
      case Channel::kPsDolp: return ps_dolp;
      case Channel::kPmAop: return pm_aop;
      case Channel::kPmDolp: return pm_dolp;
    }
    throw Error("unknown channel");
  }
  StatBlock& block(Channel c) { return const_cast<StatBlock&>(std::as_const(*this).block(c)); }

  /// Values in canonical order (channel-major, statistic-minor).
  std::array<double, kCount> values() const {
    std::array<double, kCount> out{};
    std::size_t i = 0;
    for (Channel c : kAllChannels)
      for (double v : block(c).values()) out[i++] = v;
    return out;
  }

  static LayerFeatures from_values(const std::array<double, kCount>& v) {
    LayerFeatures f;
    std::size_t i = 0;
    for (Channel c : kAllChannels) {
      std::array<double, StatBlock::kCount> b{};
      for (double& x : b) x = v[i++];
      f.block(c) = StatBlock::from_values(b);
    }
    return f;
  }

  friend bool operator==(const LayerFeatures&, const LayerFeatures&) = default;
};

/// Canonical names, e.g. "Tomography median" or
/// "Polarimetry post spread AoP roughness".
inline const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (Channel c : kAllChannels)
      for (auto s : StatBlock::kNames) n.push_back(std::string(channel_label(c)) + " " + std::string(s));
    return n;
  }();
  return names;
}

/// (name, value) pairs in canonical order.
inline std::vector<std::pair<std::string, double>> to_named(const LayerFeatures& f) {
  std::vector<std::pair<std::string, double>> out;
  const auto v = f.values();
  for (std::size_t i = 0; i < LayerFeatures::kCount; ++i) out.emplace_back(feature_names()[i], v[i]);
  return out;
}

/// Inverse of to_named; accepts any order, requires every name exactly once.
inline LayerFeatures from_named(const std::vector<std::pair<std::string, double>>& named) {
  const auto& names = feature_names();
  std::array<double, LayerFeatures::kCount> v{};
  std::array<bool, LayerFeatures::kCount> seen{};
  for (const auto& [name, value] : named) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error("unknown feature '" + name + "'");
    const auto i = static_cast<std::size_t>(it - names.begin());
    if (seen[i]) throw Error("duplicate feature '" + name + "'");
    seen[i] = true;
    v[i] = value;
  }
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!seen[i]) throw Error("missing feature '" + names[i] + "'");
  return LayerFeatures::from_values(v);
}

inline StatBlock region_stats(const GrayImage& img) {
  if (img.empty()) throw Error("cannot compute statistics of an empty image");
  const auto px = img.pixels();
  const double n = static_cast<double>(px.size());
  StatBlock s;
  double sum = 0.0;
  s.min = px[0];
  s.max = px[0];
  for (double v : px) {
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  if (s.min == s.max) {
    s.avg = s.median = s.min;
    return s;
  }
  s.avg = sum / n;
  double ss = 0.0, sa = 0.0;
  for (double v : px) {
    const double d = v - s.avg;
    ss += d * d;
    sa += std::abs(d);
  }
  s.std = std::sqrt(ss / n);
  s.roughness = sa / n;
  s.median = median_of(std::vector<double>(px.begin(), px.end()));
  // Summation rounding can push avg a hair outside [min, max] on
  // near-constant inputs.
  s.avg = std::clamp(s.avg, s.min, s.max);
  return s;
}

/// Five processed channel regions of one layer; any may be absent.
struct LayerChannels {
  std::optional<GrayImage> tomo;
  std::optional<GrayImage> ps_aop;
  std::optional<GrayImage> ps_dolp;
  std::optional<GrayImage> pm_aop;
  std::optional<GrayImage> pm_dolp;

  const std::optional<GrayImage>& get(Channel c) const {
    switch (c) {
      case Channel::kTomo: return tomo;
      case Channel::kPsAop: return ps_aop;
      case Channel::kPsDolp: return ps_dolp;
      case Channel::kPmAop: return pm_aop;
      case Channel::kPmDolp: return pm_dolp;
    }
    throw Error("unknown channel");
  }
  std::optional<GrayImage>& get(Channel c) { return const_cast<std::optional<GrayImage>&>(std::as_const(*this).get(c)); }
};

inline LayerFeatures build_layer_features(const LayerChannels& ch) {
  LayerFeatures f;
  for (Channel c : kAllChannels) {
    const auto& img = ch.get(c);
    if (!img || img->empty()) throw Error("missing channel '" + std::string(channel_key(c)) + "'");
    f.block(c) = region_stats(*img);
  }
  return f;
}

inline LayerFeatures build_layer_features(const GrayImage& tomo, const GrayImage& ps_aop, const GrayImage& ps_dolp,
                                          const GrayImage& pm_aop, const GrayImage& pm_dolp) {
  return build_layer_features(LayerChannels{tomo, ps_aop, ps_dolp, pm_aop, pm_dolp});
}

}  // namespace pfml
