#pragma once

// Run configuration: a flat JSON object with dotted keys. Every knob has a
// default here; a user file may override any subset but may not add keys.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pfml/dataset.hpp"
#include "pfml/error.hpp"
#include "pfml/eval.hpp"
#include "pfml/models/model.hpp"
#include "pfml/synth.hpp"

namespace pfml {

struct ExtractOptions {
  std::string hot_pixel_mode = "mask";  // mask | auto | off
  int hot_pixel_window = 3;
  int resample_size = 64;
  bool equalize = false;
  bool wiener = false;
  int wiener_window = 5;
  bool median = false;
  int median_window = 3;
  int threads = 1;
};

class RunConfig {
 public:
  RunConfig() : values_(defaults()) {}

  static nlohmann::ordered_json defaults() {
    const synth::SynthConfig s;
    const ExtractOptions e;
    nlohmann::ordered_json j;
    j["seed"] = 7;
    j["synth.n_coupons"] = s.n_coupons;
    j["synth.layers_per_coupon"] = s.layers_per_coupon;
    j["synth.image_size"] = s.image_size;
    j["synth.comet_rate"] = s.comet_rate;
    j["synth.dark_spot_rate"] = s.dark_spot_rate;
    j["synth.streak_rate"] = s.streak_rate;
    j["synth.label_noise_std"] = s.label_noise_std;
    j["synth.pf_min"] = s.pf_min;
    j["synth.pf_max"] = s.pf_max;
    j["synth.camera_margin"] = s.camera_margin;
    j["synth.hot_pixels"] = s.hot_pixels;
    j["synth.bit_depth"] = s.bit_depth;
    j["extract.hot_pixel_mode"] = e.hot_pixel_mode;
    j["extract.hot_pixel_window"] = e.hot_pixel_window;
    j["extract.resample_size"] = e.resample_size;
    j["extract.equalize"] = e.equalize;
    j["extract.wiener"] = e.wiener;
    j["extract.wiener_window"] = e.wiener_window;
    j["extract.median"] = e.median;
    j["extract.median_window"] = e.median_window;
    j["extract.threads"] = e.threads;
    j["split.test_frac"] = 0.2;
    j["split.mode"] = "row";
    j["scale.fit"] = "train";
    j["train.models"] = "all";
    j["eval.averaging"] = "weighted";
    j["importance.model"] = "bagging";
    j["importance.set"] = "test";
    j["importance.repeats"] = 10;
    j["importance.top_k"] = 15;
    for (ModelKind k : kAllModelKinds)
      for (const auto& [name, value] : default_hyperparams(k))
        j["model." + std::string(kind_name(k)) + "." + name] = value;
    return j;
  }

  /// Overlays `user` on the current values. Unknown keys and type changes
  /// are errors.
  /// A rejected merge leaves the config unchanged.
  void merge(const nlohmann::json& user) {
    if (!user.is_object()) throw Error("config must be a JSON object");
    RunConfig next = *this;
    for (const auto& [key, value] : user.items()) {
      if (!next.values_.contains(key)) throw Error("unknown config key '" + key + "'");
      const auto& current = next.values_[key];
      const bool ok = (current.is_number() && value.is_number()) || (current.is_string() && value.is_string()) ||
                      (current.is_boolean() && value.is_boolean());
      if (!ok) throw Error("config key '" + key + "' has the wrong type");
      next.values_[key] = value;
    }
    next.validate();
    values_ = std::move(next.values_);
  }

  static RunConfig load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError(path, "cannot open");
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path, std::string("invalid JSON: ") + e.what());
    }
    RunConfig c;
    try {
      c.merge(j);
    } catch (const Error& e) {
      throw IoError(path, e.what());
    }
    return c;
  }

  template <typename T>
  void set(const std::string& key, const T& v) {
    nlohmann::json j;
    j[key] = v;
    merge(j);
  }

  double number(const std::string& key) const { return at(key).get<double>(); }
  int integer(const std::string& key) const {
    const auto& v = at(key);
    if (v.is_number_integer()) return v.get<int>();
    const double d = v.get<double>();
    if (d != std::floor(d)) throw Error("config key '" + key + "' must be an integer");
    return static_cast<int>(d);
  }
  std::string text(const std::string& key) const { return at(key).get<std::string>(); }
  bool flag(const std::string& key) const { return at(key).get<bool>(); }
  std::uint64_t seed() const {
    const auto& v = at("seed");
    if (!v.is_number_integer() || v.get<long long>() < 0) throw Error("config key 'seed' must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  const nlohmann::ordered_json& values() const noexcept { return values_; }
  std::string dump() const { return values_.dump(2) + "\n"; }

  synth::SynthConfig synth_config() const {
    synth::SynthConfig s;
    s.seed = seed();
    s.n_coupons = integer("synth.n_coupons");
    s.layers_per_coupon = integer("synth.layers_per_coupon");
    s.image_size = integer("synth.image_size");
    s.comet_rate = number("synth.comet_rate");
    s.dark_spot_rate = number("synth.dark_spot_rate");
    s.streak_rate = number("synth.streak_rate");
    s.label_noise_std = number("synth.label_noise_std");
    s.pf_min = number("synth.pf_min");
    s.pf_max = number("synth.pf_max");
    s.camera_margin = integer("synth.camera_margin");
    s.hot_pixels = integer("synth.hot_pixels");
    s.bit_depth = integer("synth.bit_depth");
    return s;
  }

  ExtractOptions extract_options() const {
    ExtractOptions e;
    e.hot_pixel_mode = text("extract.hot_pixel_mode");
    e.hot_pixel_window = integer("extract.hot_pixel_window");
    e.resample_size = integer("extract.resample_size");
    e.equalize = flag("extract.equalize");
    e.wiener = flag("extract.wiener");
    e.wiener_window = integer("extract.wiener_window");
    e.median = flag("extract.median");
    e.median_window = integer("extract.median_window");
    e.threads = integer("extract.threads");
    return e;
  }

  SplitMode split_mode() const { return text("split.mode") == "coupon" ? SplitMode::kCoupon : SplitMode::kRow; }
  ScaleFit scale_fit() const { return text("scale.fit") == "all" ? ScaleFit::kAll : ScaleFit::kTrainOnly; }
  Averaging averaging() const { return averaging_from_name(text("eval.averaging")); }

  std::vector<ModelKind> model_kinds() const { return parse_model_list(text("train.models")); }

  ModelSpec model_spec(ModelKind k) const {
    Hyperparams h;
    for (const auto& [name, value] : default_hyperparams(k))
      h[name] = number("model." + std::string(kind_name(k)) + "." + name);
    return ModelSpec::make(k, h, derive_seed(seed(), "model", kind_name(k)));
  }

  /// "all" or a comma-separated list of kind names; output keeps the
  /// canonical order and drops duplicates.
  static std::vector<ModelKind> parse_model_list(const std::string& s) {
    if (s == "all") return {kAllModelKinds.begin(), kAllModelKinds.end()};
    std::vector<bool> want(kAllModelKinds.size(), false);
    std::stringstream ss(s);
    std::string item;
    bool any = false;
    while (std::getline(ss, item, ',')) {
      if (item.empty()) continue;
      want[static_cast<std::size_t>(kind_from_name(item))] = true;
      any = true;
    }
    if (!any) throw Error("no model kinds requested");
    std::vector<ModelKind> out;
    for (ModelKind k : kAllModelKinds)
      if (want[static_cast<std::size_t>(k)]) out.push_back(k);
    return out;
  }

 private:
  const nlohmann::ordered_json& at(const std::string& key) const {
    if (!values_.contains(key)) throw Error("unknown config key '" + key + "'");
    return values_[key];
  }

  void validate() const {
    synth_config().validate();
    const auto e = extract_options();
    if (e.hot_pixel_mode != "mask" && e.hot_pixel_mode != "auto" && e.hot_pixel_mode != "off")
      throw Error("extract.hot_pixel_mode must be mask, auto or off");
    for (int w : {e.hot_pixel_window, e.wiener_window, e.median_window})
      if (w < 1 || w % 2 == 0) throw Error("filter windows must be odd and positive");
    if (e.resample_size < 2) throw Error("extract.resample_size must be at least 2");
    if (e.threads < 1) throw Error("extract.threads must be at least 1");
    const double tf = number("split.test_frac");
    if (!(tf > 0.0 && tf < 1.0)) throw Error("split.test_frac must lie in (0, 1)");
    const auto mode = text("split.mode");
    if (mode != "row" && mode != "coupon") throw Error("split.mode must be row or coupon");
    const auto fit = text("scale.fit");
    if (fit != "train" && fit != "all") throw Error("scale.fit must be train or all");
    averaging();
    model_kinds();
    kind_from_name(text("importance.model"));
    const auto set = text("importance.set");
    if (set != "test" && set != "train" && set != "all") throw Error("importance.set must be test, train or all");
    if (integer("importance.repeats") < 1) throw Error("importance.repeats must be at least 1");
    if (integer("importance.top_k") < 1) throw Error("importance.top_k must be at least 1");
    for (ModelKind k : kAllModelKinds) model_spec(k);
  }

  nlohmann::ordered_json values_;
};

}  // namespace pfml
