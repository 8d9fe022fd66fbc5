#pragma once

// Seeded synthetic build generator with planted ground truth.
//
// Chain: processing parameters -> energy density -> latent melt quality q
// -> (a) per-coupon power factor and (b) per-layer image texture and
// defect phenomena. Lower q means rougher texture and more defects.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"
#include "pfml/calibration.hpp"
#include "pfml/dataset.hpp"
#include "pfml/error.hpp"
#include "pfml/features.hpp"
#include "pfml/image.hpp"
#include "pfml/imaging.hpp"
#include "pfml/rng.hpp"

namespace pfml::synth {

struct SynthConfig {
  int n_coupons = 117;
  int layers_per_coupon = 27;
  int image_size = 64;
  std::uint64_t seed = 7;
  double comet_rate = 2.0;      // expected events per layer at q = 0
  double dark_spot_rate = 1.5;
  double streak_rate = 0.3;
  double label_noise_std = 0.25;  // mW/(m K^2)
  double pf_min = 0.1;
  double pf_max = 1.5;
  int camera_margin = 8;  // overhead padding around each coupon region
  int hot_pixels = 6;     // stuck sensor pixels in the tomography camera
  int bit_depth = 8;

  void validate() const {
    if (n_coupons < 1 || layers_per_coupon < 1 || image_size < 2) throw Error("synthetic counts must be positive");
    if (comet_rate < 0 || dark_spot_rate < 0 || streak_rate < 0) throw Error("phenomenon rates must be >= 0");
    if (label_noise_std < 0) throw Error("label noise must be >= 0");
    if (camera_margin < 0 || hot_pixels < 0) throw Error("camera margin and hot pixel count must be >= 0");
    if (bit_depth != 8 && bit_depth != 16) throw Error("bit depth must be 8 or 16");
  }
};

// ---------------------------------------------------------------------------
// Parameters and latent quality

inline ProcessingParams sample_params(std::uint64_t seed) {
  Rng rng = make_rng(derive_seed(seed, "params"));
  auto pick = [&](const auto& grid) { return grid[uniform_index(rng, grid.size())]; };
  ProcessingParams p;
  p.laser_power = pick(ParamGrid::kPower);
  p.laser_speed = pick(ParamGrid::kSpeed);
  p.hatch_spacing = pick(ParamGrid::kHatch);
  p.layer_thickness = pick(ParamGrid::kLayer);
  p.laser_focus = pick(ParamGrid::kFocus);
  return p;
}

/// Volumetric energy density P / (v h t) in J/mm^3.
inline double energy_density(const ProcessingParams& p) {
  return p.laser_power / (p.laser_speed * p.hatch_spacing * p.layer_thickness);
}

struct EnergyModel {
  double e_star = 0.0;   // median energy density over the full grid
  double sigma_e = 0.0;  // half the interquartile range
};

namespace detail {

// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& s, double q) {
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

}  // namespace detail

inline const EnergyModel& grid_energy_model() {
  static const EnergyModel m = [] {
    std::vector<double> e;
    for (double p : ParamGrid::kPower)
      for (double v : ParamGrid::kSpeed)
        for (double h : ParamGrid::kHatch)
          for (double t : ParamGrid::kLayer)
            for (std::size_t f = 0; f < ParamGrid::kFocus.size(); ++f) e.push_back(p / (v * h * t));
    std::sort(e.begin(), e.end());
    EnergyModel out;
    out.e_star = detail::quantile_sorted(e, 0.5);
    out.sigma_e = 0.5 * (detail::quantile_sorted(e, 0.75) - detail::quantile_sorted(e, 0.25));
    return out;
  }();
  return m;
}

inline bool defocused(const ProcessingParams& p) {
  return p.laser_focus > 0.5 * (ParamGrid::kFocus[0] + ParamGrid::kFocus[1]);
}

/// Gaussian response around the grid-median energy density; a defocused
/// beam scales quality by 0.6.
inline double melt_quality(const ProcessingParams& p, const EnergyModel& m = grid_energy_model()) {
  const double d = energy_density(p) - m.e_star;
  double q = std::exp(-(d * d) / (2.0 * m.sigma_e * m.sigma_e));
  if (defocused(p)) q *= 0.6;
  return std::clamp(q, 0.0, 1.0);
}

inline double synth_power_factor(double q, double noise_std, std::uint64_t seed, double pf_min = 0.1,
                                 double pf_max = 1.5) {
  Rng rng = make_rng(derive_seed(seed, "power_factor"));
  const double noise = noise_std > 0.0 ? noise_std * standard_normal(rng) : 0.0;
  return std::max(0.0, pf_min + (pf_max - pf_min) * q + noise);
}

// ---------------------------------------------------------------------------
// Layer rendering

enum class PhenomenonType { kComet, kDarkSpot, kStreak };

inline std::string phenomenon_name(PhenomenonType t) {
  switch (t) {
    case PhenomenonType::kComet: return "comet";
    case PhenomenonType::kDarkSpot: return "dark_spot";
    case PhenomenonType::kStreak: return "streak";
  }
  return "";
}

struct Phenomenon {
  PhenomenonType type = PhenomenonType::kComet;
  double x = 0.0;  // centre (comet, spot) or unused (streak)
  double y = 0.0;  // centre, or the row of a streak
  double magnitude = 0.0;
  double size = 0.0;   // comet length or spot radius
  double angle = 0.0;  // comet orientation, radians

  nlohmann::json to_json() const {
    return {{"type", phenomenon_name(type)}, {"x", x},       {"y", y},
            {"magnitude", magnitude},        {"size", size}, {"angle", angle}};
  }
};

struct Rates {
  double comet = 0.0;
  double dark_spot = 0.0;
  double streak = 0.0;
};

struct RenderedLayer {
  GrayImage image;
  std::vector<Phenomenon> events;
};

/// Texture std grows from 0.08 at q = 1 to 0.16 at q = 0.
inline double texture_std(double q) { return 0.08 * (1.0 + (1.0 - q)); }

inline GrayImage render_base(double q, int size, Rng& rng) {
  GrayImage img(size, size);
  const double sd = texture_std(q);
  for (double& v : img.pixels()) v = std::clamp(0.5 + sd * standard_normal(rng), 0.0, 1.0);
  return img;
}

/// Paints one phenomenon: comets add brightness along a short segment, dark
/// spots and streaks scale intensity down by `magnitude`.
inline void apply_phenomenon(GrayImage& img, const Phenomenon& e) {
  switch (e.type) {
    case PhenomenonType::kComet: {
      std::vector<char> hit(img.size(), 0);
      const double dx = std::cos(e.angle), dy = std::sin(e.angle);
      for (double t = 0.0; t <= e.size; t += 0.5) {
        const int px = static_cast<int>(std::lround(e.x + t * dx));
        const int py = static_cast<int>(std::lround(e.y + t * dy));
        if (!img.contains(px, py)) continue;
        auto& flag = hit[static_cast<std::size_t>(py) * img.width() + px];
        if (flag) continue;
        flag = 1;
        img.at(px, py) = std::min(1.0, img.at(px, py) + e.magnitude);
      }
      break;
    }
    case PhenomenonType::kDarkSpot: {
      const int r = static_cast<int>(std::ceil(e.size));
      for (int yy = static_cast<int>(e.y) - r; yy <= static_cast<int>(e.y) + r; ++yy)
        for (int xx = static_cast<int>(e.x) - r; xx <= static_cast<int>(e.x) + r; ++xx)
          if (img.contains(xx, yy) && std::hypot(xx - e.x, yy - e.y) <= e.size) img.at(xx, yy) *= e.magnitude;
      break;
    }
    case PhenomenonType::kStreak: {
      const int row = static_cast<int>(e.y);
      if (row < 0 || row >= img.height()) break;
      for (int xx = 0; xx < img.width(); ++xx) img.at(xx, row) *= e.magnitude;
      break;
    }
  }
}

/// Post-melt channels see half the phenomenon rate of post-spread and
/// tomography channels.
inline double channel_rate_factor(Channel c) {
  return c == Channel::kPmAop || c == Channel::kPmDolp ? 0.5 : 1.0;
}

/// One channel image of one coupon-layer in overhead coordinates.
/// Deterministic in (q, channel, layer_index, seed).
inline RenderedLayer render_layer(double q, Channel channel, int layer_index, std::uint64_t seed, const Rates& rates,
                                  int size = 64) {
  Rng rng = make_rng(derive_seed(seed, "render", static_cast<std::uint64_t>(layer_index),
                                 static_cast<std::uint64_t>(channel)));
  RenderedLayer out{render_base(q, size, rng), {}};
  const double scale = (1.0 - q) * channel_rate_factor(channel);
  const double s = static_cast<double>(size);
  const unsigned comets = poisson(rng, rates.comet * scale);
  for (unsigned k = 0; k < comets; ++k) {
    Phenomenon e{PhenomenonType::kComet};
    e.x = uniform01(rng) * (s - 1);
    e.y = uniform01(rng) * (s - 1);
    e.size = 3.0 + 5.0 * uniform01(rng);
    e.angle = 2.0 * std::numbers::pi * uniform01(rng);
    e.magnitude = 0.25 + 0.2 * uniform01(rng);
    out.events.push_back(e);
  }
  const unsigned spots = poisson(rng, rates.dark_spot * scale);
  for (unsigned k = 0; k < spots; ++k) {
    Phenomenon e{PhenomenonType::kDarkSpot};
    e.x = uniform01(rng) * (s - 1);
    e.y = uniform01(rng) * (s - 1);
    e.size = 1.5 + 2.0 * uniform01(rng);
    e.magnitude = 0.15 + 0.2 * uniform01(rng);
    out.events.push_back(e);
  }
  const unsigned streaks = poisson(rng, rates.streak * scale);
  for (unsigned k = 0; k < streaks; ++k) {
    Phenomenon e{PhenomenonType::kStreak};
    e.y = static_cast<double>(uniform_index(rng, static_cast<std::size_t>(size)));
    e.magnitude = 0.2 + 0.1 * uniform01(rng);
    out.events.push_back(e);
  }
  for (const auto& e : out.events) apply_phenomenon(out.image, e);
  return out;
}

// ---------------------------------------------------------------------------
// Build plan and on-disk layout

struct CouponTruth {
  CouponRecord record;
  double energy_density = 0.0;
  double quality = 0.0;
};

struct BuildPlan {
  SynthConfig config;
  EnergyModel energy;
  std::vector<CouponTruth> coupons;
  Calibration calibration;
  Homography overhead_to_camera;

  std::vector<CouponRecord> records() const {
    std::vector<CouponRecord> r;
    for (const auto& c : coupons) r.push_back(c.record);
    return r;
  }
};

inline std::string coupon_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "C%03d", index + 1);
  return buf;
}

/// Coupons, latent truth, and the camera geometry; no images yet.
inline BuildPlan plan_build(const SynthConfig& cfg) {
  cfg.validate();
  BuildPlan plan;
  plan.config = cfg;
  plan.energy = grid_energy_model();
  for (int i = 0; i < cfg.n_coupons; ++i) {
    const auto key = static_cast<std::uint64_t>(i);
    CouponTruth c;
    c.record.coupon_id = coupon_id(i);
    c.record.params = sample_params(derive_seed(cfg.seed, "coupon", key));
    c.energy_density = energy_density(c.record.params);
    c.quality = melt_quality(c.record.params, plan.energy);
    c.record.power_factor = synth_power_factor(c.quality, cfg.label_noise_std, derive_seed(cfg.seed, "coupon", key),
                                               cfg.pf_min, cfg.pf_max);
    plan.coupons.push_back(c);
  }

  // Mild keystone: overhead canvas corners -> camera corners.
  const int m = cfg.camera_margin;
  const int w = cfg.image_size + 2 * m, h = cfg.image_size + 2 * m;
  const double fw = w - 1, fh = h - 1;
  const std::array<Point2, 4> overhead{{{0, 0}, {fw, 0}, {fw, fh}, {0, fh}}};
  const std::array<Point2, 4> camera{{{0.04 * fw, 0.02 * fh}, {0.97 * fw, 0.0}, {fw, 0.98 * fh}, {0.0, 0.95 * fh}}};
  std::vector<Correspondence> o2c;
  for (std::size_t k = 0; k < 4; ++k) o2c.push_back({overhead[k], camera[k]});
  plan.overhead_to_camera = estimate_homography(o2c);

  auto& cal = plan.calibration;
  cal.overhead_width = w;
  cal.overhead_height = h;
  // Corners, edge midpoints and centre, each mapped exactly.
  for (double fx : {0.0, 0.5, 1.0})
    for (double fy : {0.0, 0.5, 1.0}) {
      const Point2 o{fx * fw, fy * fh};
      cal.correspondences.push_back({plan.overhead_to_camera.apply(o), o});
    }
  for (const auto& c : plan.coupons) cal.regions.push_back({c.record.coupon_id, {m, m, cfg.image_size, cfg.image_size}});
  Rng rng = make_rng(derive_seed(cfg.seed, "hot_pixels"));
  for (int k = 0; k < cfg.hot_pixels; ++k)
    cal.hot_pixels.push_back({static_cast<int>(uniform_index(rng, static_cast<std::size_t>(w))),
                              static_cast<int>(uniform_index(rng, static_cast<std::size_t>(h)))});
  return plan;
}

inline Rates config_rates(const SynthConfig& cfg) { return {cfg.comet_rate, cfg.dark_spot_rate, cfg.streak_rate}; }

struct CameraFrame {
  GrayImage image;  // camera view as written to disk
  std::vector<Phenomenon> events;
};

/// Renders one channel of one coupon-layer and projects it into the
/// off-axis camera frame. Tomography frames carry the stuck hot pixels.
inline CameraFrame render_camera_frame(const BuildPlan& plan, std::size_t coupon, int layer, Channel channel) {
  const auto& cfg = plan.config;
  const auto& truth = plan.coupons.at(coupon);
  const std::uint64_t stream = derive_seed(cfg.seed, "coupon", static_cast<std::uint64_t>(coupon));
  RenderedLayer r = render_layer(truth.quality, channel, layer, stream, config_rates(cfg), cfg.image_size);
  const int w = plan.calibration.overhead_width, h = plan.calibration.overhead_height;
  GrayImage canvas(w, h, 0.5);
  for (int y = 0; y < cfg.image_size; ++y)
    for (int x = 0; x < cfg.image_size; ++x) canvas.at(x + cfg.camera_margin, y + cfg.camera_margin) = r.image.at(x, y);
  CameraFrame out{warp_to_overhead(canvas, plan.overhead_to_camera, w, h), std::move(r.events)};
  if (channel == Channel::kTomo)
    for (const auto& p : plan.calibration.hot_pixels) out.image.at(p.x, p.y) = 1.0;
  return out;
}

inline std::string layer_dir_name(int layer) { return "layer_" + std::to_string(layer); }

struct GroundTruth {
  nlohmann::json json;
};

/// Writes <out>/<coupon_id>/layer_<k>/<channel>.png, coupons.json,
/// ground_truth.json and calibration.json. Returns the ground truth.
inline GroundTruth generate_build(const SynthConfig& cfg, const std::filesystem::path& out) {
  namespace fs = std::filesystem;
  const BuildPlan plan = plan_build(cfg);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError(out.string(), "cannot create directory: " + ec.message());

  auto write_json = [](const fs::path& p, const nlohmann::json& j) {
    std::ofstream f(p);
    if (!f) throw IoError(p.string(), "cannot open for writing");
    f << j.dump(1) << '\n';
    if (!f) throw IoError(p.string(), "write failed");
  };

  const BitDepth depth = cfg.bit_depth == 16 ? BitDepth::k16 : BitDepth::k8;
  GroundTruth gt;
  gt.json["energy_model"] = {{"e_star", plan.energy.e_star}, {"sigma_e", plan.energy.sigma_e}};
  gt.json["hot_pixels"] = calibration_to_json(plan.calibration)["hot_pixels"];
  gt.json["coupons"] = nlohmann::json::array();
  for (std::size_t c = 0; c < plan.coupons.size(); ++c) {
    const auto& truth = plan.coupons[c];
    nlohmann::json cj{{"coupon_id", truth.record.coupon_id},
                      {"energy_density", truth.energy_density},
                      {"quality", truth.quality},
                      {"power_factor", truth.record.power_factor},
                      {"layers", nlohmann::json::array()}};
    for (int layer = 0; layer < cfg.layers_per_coupon; ++layer) {
      const fs::path dir = out / truth.record.coupon_id / layer_dir_name(layer);
      fs::create_directories(dir, ec);
      if (ec) throw IoError(dir.string(), "cannot create directory: " + ec.message());
      nlohmann::json lj{{"layer", layer}, {"events", nlohmann::json::object()}};
      for (Channel ch : kAllChannels) {
        CameraFrame frame = render_camera_frame(plan, c, layer, ch);
        write_png(frame.image, (dir / (std::string(channel_key(ch)) + ".png")).string(), depth);
        nlohmann::json ev = nlohmann::json::array();
        for (const auto& e : frame.events) ev.push_back(e.to_json());
        lj["events"][std::string(channel_key(ch))] = std::move(ev);
      }
      cj["layers"].push_back(std::move(lj));
    }
    gt.json["coupons"].push_back(std::move(cj));
  }
  write_json(out / "coupons.json", coupons_to_json(plan.records()));
  write_json(out / "ground_truth.json", gt.json);
  write_json(out / "calibration.json", calibration_to_json(plan.calibration));
  return gt;
}

}  // namespace pfml::synth
