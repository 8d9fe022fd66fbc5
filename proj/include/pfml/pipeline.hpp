#pragma once

// End-to-end stages: synth, extract, assemble, train, importance. Each
// stage reads and writes fixed filenames under an output directory.

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "pfml/calibration.hpp"
#include "pfml/config.hpp"
#include "pfml/dataset.hpp"
#include "pfml/eval.hpp"
#include "pfml/features.hpp"
#include "pfml/imaging.hpp"
#include "pfml/models/model.hpp"
#include "pfml/synth.hpp"

namespace pfml {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Per-layer processing

/// Camera frames of one coupon-layer, indexed by Channel.
using CameraFrames = std::array<GrayImage, 5>;

/// Overhead 64x64 region of one camera frame, after the enabled filters.
inline GrayImage process_frame(const GrayImage& frame, Channel channel, const Homography& camera_to_overhead,
                               const Calibration& cal, const Rect& region, const ExtractOptions& opt) {
  GrayImage img = frame;
  if (channel == Channel::kTomo) {
    if (opt.hot_pixel_mode == "mask")
      img = clean_hot_pixels(img, std::span<const PixelCoord>(cal.hot_pixels), opt.hot_pixel_window);
    else if (opt.hot_pixel_mode == "auto")
      img = clean_hot_pixels(img, std::nullopt, opt.hot_pixel_window);
  }
  img = warp_to_overhead(img, camera_to_overhead, cal.overhead_width, cal.overhead_height);
  if (!rect_in_bounds(img, region)) throw Error("region lies outside the overhead view");
  img = resample_lanczos4(crop(img, region), opt.resample_size, opt.resample_size);
  if (opt.equalize) img = equalize_histogram(img);
  if (opt.wiener) img = wiener_deblur(img, opt.wiener_window);
  if (opt.median) img = median_filter(img, opt.median_window);
  return img;
}

inline LayerFeatures process_layer(const CameraFrames& frames, const Homography& camera_to_overhead,
                                   const Calibration& cal, const std::string& coupon_id, const ExtractOptions& opt) {
  const Rect region = cal.region(coupon_id).rect;
  LayerChannels ch;
  for (Channel c : kAllChannels)
    ch.get(c) = process_frame(frames[static_cast<std::size_t>(c)], c, camera_to_overhead, cal, region, opt);
  return build_layer_features(ch);
}

/// Runs `job(i)` for i in [0, n) on `threads` workers. Each index is
/// handled by exactly one worker, so results stored per index do not
/// depend on the thread count. The first exception is rethrown.
template <typename Job>
void parallel_for(std::size_t n, int threads, Job job) {
  const auto t = static_cast<std::size_t>(std::max(1, threads));
  if (t == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::vector<std::exception_ptr> errors(t);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < t; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += t) job(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Features for every coupon-layer of a generated build, rendered in
/// memory and quantized exactly as the PNG files would be.
inline std::map<LayerKey, LayerFeatures> extract_in_memory(const synth::BuildPlan& plan, const ExtractOptions& opt) {
  const Homography h = estimate_homography(plan.calibration.correspondences);
  const auto layers = static_cast<std::size_t>(plan.config.layers_per_coupon);
  const std::size_t n = plan.coupons.size() * layers;
  const BitDepth depth = plan.config.bit_depth == 16 ? BitDepth::k16 : BitDepth::k8;
  std::vector<LayerFeatures> out(n);
  parallel_for(n, opt.threads, [&](std::size_t i) {
    const std::size_t c = i / layers;
    const int layer = static_cast<int>(i % layers);
    CameraFrames frames;
    for (Channel ch : kAllChannels)
      frames[static_cast<std::size_t>(ch)] =
          quantize_image(synth::render_camera_frame(plan, c, layer, ch).image, depth);
    out[i] = process_layer(frames, h, plan.calibration, plan.coupons[c].record.coupon_id, opt);
  });
  std::map<LayerKey, LayerFeatures> result;
  for (std::size_t i = 0; i < n; ++i)
    result[{plan.coupons[i / layers].record.coupon_id, static_cast<int>(i % layers)}] = out[i];
  return result;
}

// ---------------------------------------------------------------------------
// File helpers

inline void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError(p.string(), "cannot create directory: " + ec.message());
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError(p.string(), "cannot open for writing");
  f << text;
  if (!f) throw IoError(p.string(), "write failed");
}

inline void write_json_file(const fs::path& p, const nlohmann::json& j) { write_text(p, j.dump(2) + "\n"); }

inline nlohmann::json read_json_file(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw IoError(p.string(), "cannot open");
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(p.string(), std::string("invalid JSON: ") + e.what());
  }
}

inline void echo_config(const RunConfig& cfg, const fs::path& out) {
  ensure_dir(out);
  write_text(out / "effective_config.json", cfg.dump());
}

// ---------------------------------------------------------------------------
// Commands

inline void cmd_synth(const RunConfig& cfg, const fs::path& out) {
  echo_config(cfg, out);
  synth::generate_build(cfg.synth_config(), out);
}

/// Layer directories of one coupon, sorted by layer index.
inline std::vector<std::pair<int, fs::path>> layer_dirs(const fs::path& coupon_dir) {
  if (!fs::is_directory(coupon_dir)) throw IoError(coupon_dir.string(), "missing coupon directory");
  static const std::regex pattern("layer_([0-9]+)");
  std::vector<std::pair<int, fs::path>> out;
  for (const auto& entry : fs::directory_iterator(coupon_dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_directory() && std::regex_match(name, m, pattern)) out.emplace_back(std::stoi(m[1].str()), entry.path());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw IoError(coupon_dir.string(), "no layer directories");
  return out;
}

/// Reads every coupon-layer listed by the calibration regions and writes
/// features.csv.
inline std::map<LayerKey, LayerFeatures> cmd_extract(const RunConfig& cfg, const fs::path& build_dir,
                                                     const fs::path& calibration_file, const fs::path& out) {
  echo_config(cfg, out);
  const Calibration cal = load_calibration(calibration_file.string());
  const Homography h = estimate_homography(cal.correspondences);
  const ExtractOptions opt = cfg.extract_options();

  struct Job {
    std::string coupon;
    int layer;
    fs::path dir;
  };
  std::vector<Job> jobs;
  for (const auto& r : cal.regions)
    for (const auto& [layer, dir] : layer_dirs(build_dir / r.coupon_id)) jobs.push_back({r.coupon_id, layer, dir});

  std::vector<LayerFeatures> feats(jobs.size());
  parallel_for(jobs.size(), opt.threads, [&](std::size_t i) {
    CameraFrames frames;
    for (Channel c : kAllChannels)
      frames[static_cast<std::size_t>(c)] = read_image((jobs[i].dir / (std::string(channel_key(c)) + ".png")).string());
    feats[i] = process_layer(frames, h, cal, jobs[i].coupon, opt);
  });
  std::map<LayerKey, LayerFeatures> result;
  for (std::size_t i = 0; i < jobs.size(); ++i) result[{jobs[i].coupon, jobs[i].layer}] = feats[i];
  save_features_csv(result, (out / "features.csv").string());
  return result;
}

inline std::vector<CouponRecord> load_coupons(const fs::path& p) {
  try {
    return coupons_from_json(read_json_file(p));
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    throw IoError(p.string(), e.what());
  }
}

/// Joins features with coupon metadata, binarizes at the median and writes
/// dataset.csv and binarize.json.
inline BinarizeResult cmd_assemble(const RunConfig& cfg, const fs::path& features_csv, const fs::path& coupons_json,
                                   const fs::path& out) {
  echo_config(cfg, out);
  const auto feats = load_features_csv(features_csv.string());
  const auto coupons = load_coupons(coupons_json);
  BinarizeResult b = binarize_labels(assemble(coupons, feats));
  save_csv(b.dataset, (out / "dataset.csv").string());
  write_json_file(out / "binarize.json", {{"median", b.median},
                                          {"rows", b.dataset.size()},
                                          {"ties", b.ties},
                                          {"degenerate", b.degenerate}});
  return b;
}

struct TrainOutcome {
  std::vector<ModelResult> results;
  std::vector<TrainedModel> models;
  ScaledSplit split;
  std::vector<int> test_labels;
  std::vector<std::vector<int>> predictions;  // per model, on the test rows
  std::vector<std::vector<double>> scores;
};

inline nlohmann::json scaler_to_json(const Scaler& s) {
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t i = 0; i < predictor_names().size(); ++i)
    j.push_back({{"feature", predictor_names()[i]}, {"min", s.min[i]}, {"max", s.max[i]}});
  return j;
}

/// Splits, scales, fits each requested kind on the training part and
/// scores it on the held-out part. Works on an in-memory dataset.
inline TrainOutcome train_models(const RunConfig& cfg, const Dataset& ds) {
  auto [train, test] = train_test_split(ds, cfg.number("split.test_frac"), cfg.seed(), cfg.split_mode());
  TrainOutcome out;
  out.split = minmax_scale(train, test, cfg.scale_fit());
  const FeatureTable tr = to_table(out.split.train);
  const FeatureTable te = to_table(out.split.test);
  for (ModelKind k : cfg.model_kinds()) {
    TrainedModel m = fit(cfg.model_spec(k), tr);
    const auto pred = m.predict(te.x);
    const models::Vector s = m.score(te.x);
    const std::vector<double> score(s.data(), s.data() + s.size());
    out.results.push_back({k, compute_metrics(te.y, pred, score, cfg.averaging())});
    out.models.push_back(std::move(m));
    out.predictions.push_back(pred);
    out.scores.push_back(score);
  }
  out.test_labels = te.y;
  return out;
}

inline TrainOutcome cmd_train(const RunConfig& cfg, const fs::path& dataset_csv, const fs::path& out) {
  echo_config(cfg, out);
  TrainOutcome t = train_models(cfg, load_csv(dataset_csv.string()));
  ensure_dir(out / "models");
  nlohmann::json metrics = nlohmann::json::array();
  for (std::size_t i = 0; i < t.models.size(); ++i) {
    const ModelKind k = t.results[i].kind;
    t.models[i].save((out / "models" / (std::string(kind_name(k)) + ".json")).string());
    nlohmann::json row{{"model", std::string(kind_name(k))}, {"label", std::string(kind_label(k))}};
    row["metrics"] = t.results[i].metrics.to_json();
    for (Averaging a : {Averaging::kBinaryPos1, Averaging::kMacro, Averaging::kWeighted}) {
      const MetricsReport m = compute_metrics(t.test_labels, t.predictions[i], t.scores[i], a);
      row["by_averaging"][std::string(averaging_name(a))] = {
          {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
    }
    if (!t.models[i].warnings().empty()) row["warnings"] = t.models[i].warnings();
    metrics.push_back(std::move(row));
  }
  write_json_file(out / "metrics.json", metrics);
  std::string text = "Averaging: " + std::string(averaging_name(cfg.averaging())) + "\n" + metrics_table(t.results);
  if (cfg.averaging() != Averaging::kBinaryPos1) {
    std::vector<ModelResult> binary;
    for (std::size_t i = 0; i < t.models.size(); ++i)
      binary.push_back({t.results[i].kind, compute_metrics(t.test_labels, t.predictions[i], t.scores[i],
                                                           Averaging::kBinaryPos1)});
    text += "\nAveraging: binary\n" + metrics_table(binary);
  }
  write_text(out / "metrics.txt", text);
  save_csv(t.split.train, (out / "train_scaled.csv").string());
  save_csv(t.split.test, (out / "test_scaled.csv").string());
  write_json_file(out / "scaler.json", scaler_to_json(t.split.scaler));
  return t;
}

/// Permutation importance of a saved model on a (scaled) dataset; writes
/// importance.csv and importance.txt.
inline ImportanceReport cmd_importance(const RunConfig& cfg, const fs::path& model_file, const fs::path& dataset_csv,
                                       const fs::path& out) {
  echo_config(cfg, out);
  const TrainedModel model = TrainedModel::load(model_file.string());
  const Dataset ds = load_csv(dataset_csv.string());
  const ImportanceReport rep =
      permutation_importance(model, ds, cfg.integer("importance.repeats"), derive_seed(cfg.seed(), "permutation"));
  write_text(out / "importance.csv", importance_csv(rep));
  write_text(out / "importance.txt",
             importance_table(rep, static_cast<std::size_t>(cfg.integer("importance.top_k"))));
  return rep;
}

/// synth -> extract -> assemble -> train -> importance under one root.
inline void cmd_run(const RunConfig& cfg, const fs::path& out) {
  const fs::path build = out / "build";
  cmd_synth(cfg, build);
  cmd_extract(cfg, build, build / "calibration.json", out / "extract");
  cmd_assemble(cfg, out / "extract" / "features.csv", build / "coupons.json", out / "assemble");
  const auto t = cmd_train(cfg, out / "assemble" / "dataset.csv", out / "train");
  const std::string imp = cfg.text("importance.model");
  const bool trained = std::any_of(t.results.begin(), t.results.end(),
                                   [&](const ModelResult& r) { return kind_name(r.kind) == imp; });
  if (!trained) throw Error("importance model '" + imp + "' was not among the trained kinds");
  const std::string set = cfg.text("importance.set");
  fs::path rows = out / "train" / (set == "train" ? "train_scaled.csv" : "test_scaled.csv");
  if (set == "all") {
    Dataset all = t.split.train;
    all.rows.insert(all.rows.end(), t.split.test.rows.begin(), t.split.test.rows.end());
    rows = out / "importance" / "all_scaled.csv";
    ensure_dir(out / "importance");
    save_csv(all, rows.string());
  }
  cmd_importance(cfg, out / "train" / "models" / (imp + ".json"), rows, out / "importance");
}

}  // namespace pfml
