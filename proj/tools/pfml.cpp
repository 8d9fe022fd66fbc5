// pfml: synth -> extract -> assemble -> train -> importance.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "pfml/pipeline.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<long long> seed;
  std::string out;
  std::optional<std::string> models;
  std::optional<int> top_k;
  std::optional<std::string> scale_fit;
  std::optional<std::string> averaging;
  std::optional<std::string> split;
};

void add_common(CLI::App* cmd, Common& c, bool train_flags) {
  cmd->add_option("--config", c.config, "JSON file with dotted-key overrides")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--out", c.out, "output directory")->required();
  if (train_flags) {
    cmd->add_option("--models", c.models, "comma-separated model kinds or 'all'");
    cmd->add_option("--top-k", c.top_k, "rows in the importance table");
    cmd->add_option("--scale-fit", c.scale_fit, "fit the scaler on train or all rows")
        ->check(CLI::IsMember({"train", "all"}));
    cmd->add_option("--averaging", c.averaging, "precision/recall averaging")
        ->check(CLI::IsMember({"binary", "macro", "weighted"}));
    cmd->add_option("--split", c.split, "split rows or whole coupons")->check(CLI::IsMember({"row", "coupon"}));
  }
}

pfml::RunConfig resolve(const Common& c) {
  pfml::RunConfig cfg = c.config.empty() ? pfml::RunConfig{} : pfml::RunConfig::load(c.config);
  if (c.seed) cfg.set("seed", *c.seed);
  if (c.models) cfg.set("train.models", *c.models);
  if (c.top_k) cfg.set("importance.top_k", *c.top_k);
  if (c.scale_fit) cfg.set("scale.fit", *c.scale_fit);
  if (c.averaging) cfg.set("eval.averaging", *c.averaging);
  if (c.split) cfg.set("split.mode", *c.split);
  return cfg;
}

int report(const std::string& command, const std::string& kind, const std::string& message,
           const std::string& path = {}) {
  nlohmann::json j{{"error", {{"command", command}, {"kind", kind}, {"message", message}}}};
  if (!path.empty()) j["error"]["path"] = path;
  std::cerr << j.dump() << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Power factor prediction from processing parameters and in-situ images"};
  app.require_subcommand(1);

  Common c;
  std::string build_dir, calibration, features, coupons, dataset, model;

  auto* synth = app.add_subcommand("synth", "generate a synthetic build");
  add_common(synth, c, false);

  auto* extract = app.add_subcommand("extract", "compute per-layer image features");
  add_common(extract, c, false);
  extract->add_option("--build", build_dir, "build directory")->required()->check(CLI::ExistingDirectory);
  extract->add_option("--calibration", calibration, "calibration JSON (default <build>/calibration.json)");

  auto* assemble = app.add_subcommand("assemble", "join features with coupon metadata and binarize");
  add_common(assemble, c, false);
  assemble->add_option("--features", features, "features.csv")->required();
  assemble->add_option("--coupons", coupons, "coupons.json")->required();

  auto* train = app.add_subcommand("train", "fit and evaluate models");
  add_common(train, c, true);
  train->add_option("--dataset", dataset, "dataset.csv")->required();

  auto* importance = app.add_subcommand("importance", "permutation importance of a saved model");
  add_common(importance, c, true);
  importance->add_option("--model", model, "model JSON")->required();
  importance->add_option("--dataset", dataset, "scaled dataset CSV, normally test_scaled.csv")->required();

  auto* run = app.add_subcommand("run", "all stages under one output directory");
  add_common(run, c, true);

  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const pfml::RunConfig cfg = resolve(c);
    if (*synth) {
      pfml::cmd_synth(cfg, c.out);
    } else if (*extract) {
      const std::string cal = calibration.empty() ? (std::filesystem::path(build_dir) / "calibration.json").string()
                                                  : calibration;
      pfml::cmd_extract(cfg, build_dir, cal, c.out);
    } else if (*assemble) {
      const auto b = pfml::cmd_assemble(cfg, features, coupons, c.out);
      std::printf("rows %zu, median power factor %.6g\n", b.dataset.size(), b.median);
    } else if (*train) {
      pfml::cmd_train(cfg, dataset, c.out);
      std::cout << std::ifstream(std::filesystem::path(c.out) / "metrics.txt").rdbuf();
    } else if (*importance) {
      const auto rep = pfml::cmd_importance(cfg, model, dataset, c.out);
      std::fputs(pfml::importance_table(rep, static_cast<std::size_t>(cfg.integer("importance.top_k"))).c_str(),
                 stdout);
    } else if (*run) {
      pfml::cmd_run(cfg, c.out);
      std::ifstream m(std::filesystem::path(c.out) / "train" / "metrics.txt");
      std::ifstream i(std::filesystem::path(c.out) / "importance" / "importance.txt");
      std::cout << m.rdbuf() << '\n' << i.rdbuf();
    }
  } catch (const pfml::IoError& e) {
    return report(command, "io", e.what(), e.path());
  } catch (const pfml::Error& e) {
    return report(command, "invalid_input", e.what());
  } catch (const std::exception& e) {
    return report(command, "internal", e.what());
  }
  return 0;
}
