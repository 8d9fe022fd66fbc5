#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pfml/pipeline.hpp"

using namespace pfml;
namespace fs = std::filesystem;

namespace {

fs::path fresh(const std::string& name) {
  auto p = fs::temp_directory_path() / ("pfml_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

RunConfig small_config() {
  RunConfig c;
  c.merge({{"synth.n_coupons", 12},
           {"synth.layers_per_coupon", 4},
           {"synth.image_size", 24},
           {"synth.camera_margin", 4},
           {"extract.resample_size", 24},
           {"model.mlp.hidden", 8},
           {"model.mlp.epochs", 30},
           {"importance.repeats", 3}});
  return c;
}

int run_cli(const std::string& args, const fs::path& err) {
  const std::string cmd = std::string(PFML_CLI_PATH) + " " + args + " 2> \"" + err.string() + "\" > /dev/null";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(Config, RejectsUnknownKeysAndWrongTypes) {
  RunConfig c;
  EXPECT_THROW(c.merge({{"synth.n_coupon", 3}}), Error);
  EXPECT_THROW(c.merge({{"synth.n_coupons", "three"}}), Error);
  EXPECT_THROW(c.merge({{"split.mode", "random"}}), Error);
  EXPECT_EQ(c.text("split.mode"), "row");
  EXPECT_THROW(c.merge({{"model.bagging.learning_rate", 0.1}}), Error);
  EXPECT_NO_THROW(c.merge({{"model.bagging.n_estimators", 10}}));
  EXPECT_EQ(c.model_spec(ModelKind::kBagging).get_int("n_estimators"), 10);

  const auto dir = fresh("config");
  std::ofstream(dir / "bad.json") << "{\"seed\": 1, \"nope\": 2}";
  try {
    RunConfig::load((dir / "bad.json").string());
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("nope"), std::string::npos);
  }
}

TEST(Config, EffectiveConfigEchoesEveryKey) {
  const auto dir = fresh("echo");
  RunConfig c;
  c.set("seed", 99);
  echo_config(c, dir);
  const auto j = nlohmann::json::parse(slurp(dir / "effective_config.json"));
  EXPECT_EQ(j.at("seed"), 99);
  EXPECT_EQ(j.size(), RunConfig::defaults().size());
  RunConfig back;
  back.merge(j);
  EXPECT_EQ(back.dump(), c.dump());
}

TEST(Config, ModelListParsing) {
  RunConfig c;
  c.set("train.models", "bagging,gaussian_nb,bagging");
  const auto kinds = c.model_kinds();
  ASSERT_EQ(kinds.size(), 2u);
  EXPECT_EQ(kinds[0], ModelKind::kGaussianNb);
  EXPECT_EQ(kinds[1], ModelKind::kBagging);
  EXPECT_THROW(c.set("train.models", "bagging,xgboost"), Error);
  c.set("train.models", "all");
  EXPECT_EQ(c.model_kinds().size(), 10u);
}

TEST(Pipeline, ThreadCountDoesNotChangeFeatures) {
  RunConfig c = small_config();
  const auto plan = synth::plan_build(c.synth_config());
  ExtractOptions one = c.extract_options(), four = one;
  four.threads = 4;
  EXPECT_EQ(extract_in_memory(plan, one), extract_in_memory(plan, four));
}

TEST(Pipeline, DiskAndMemoryExtractionAgree) {
  RunConfig c = small_config();
  const auto dir = fresh("agree");
  cmd_synth(c, dir / "build");
  const auto disk = cmd_extract(c, dir / "build", dir / "build" / "calibration.json", dir / "extract");
  const auto mem = extract_in_memory(synth::plan_build(c.synth_config()), c.extract_options());
  ASSERT_EQ(disk.size(), mem.size());
  for (const auto& [key, f] : mem) EXPECT_EQ(disk.at(key), f) << key.first << "/" << key.second;
}

TEST(Pipeline, EndToEndRunIsByteIdentical) {
  const RunConfig c = small_config();
  const auto dir = fresh("e2e");
  cmd_run(c, dir / "a");
  cmd_run(c, dir / "b");
  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir / "a");
    const auto ext = rel.extension();
    if (ext != ".csv" && ext != ".json" && ext != ".txt") continue;
    EXPECT_EQ(slurp(e.path()), slurp(dir / "b" / rel)) << rel;
    ++compared;
  }
  EXPECT_GT(compared, 15u);

  const auto metrics = nlohmann::json::parse(slurp(dir / "a" / "train" / "metrics.json"));
  ASSERT_EQ(metrics.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(metrics[i].at("model"), kind_name(kAllModelKinds[i]));
  for (ModelKind k : kAllModelKinds)
    EXPECT_TRUE(fs::exists(dir / "a" / "train" / "models" / (std::string(kind_name(k)) + ".json")));
  EXPECT_EQ(metrics[0].at("metrics").at("averaging"), "weighted");
  for (const char* a : {"binary", "macro", "weighted"}) EXPECT_TRUE(metrics[0].at("by_averaging").contains(a)) << a;
  EXPECT_EQ(metrics[0].at("by_averaging").at("weighted").at("precision"), metrics[0].at("metrics").at("precision"));
  const std::string mt = slurp(dir / "a" / "train" / "metrics.txt");
  EXPECT_EQ(mt.rfind("Averaging: weighted\n", 0), 0u);
  EXPECT_NE(mt.find("Averaging: binary\n"), std::string::npos);

  const std::string table = slurp(dir / "a" / "importance" / "importance.txt");
  EXPECT_EQ(table.rfind("Top 15 important features", 0), 0u);
  const Dataset scaled = load_csv((dir / "a" / "train" / "train_scaled.csv").string());
  for (const auto& r : scaled.rows)
    for (double v : predictors(r)) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
}

TEST(Cli, RunsSubcommandsAndReportsErrors) {
  const auto dir = fresh("cli");
  const RunConfig c = small_config();
  std::ofstream(dir / "cfg.json") << c.dump();
  const std::string cfg = " --config \"" + (dir / "cfg.json").string() + "\"";
  const auto err = dir / "err.txt";

  ASSERT_EQ(run_cli("synth" + cfg + " --out \"" + (dir / "build").string() + "\"", err), 0) << slurp(err);
  ASSERT_EQ(run_cli("extract" + cfg + " --build \"" + (dir / "build").string() + "\" --out \"" +
                        (dir / "ex").string() + "\"",
                    err),
            0)
      << slurp(err);
  ASSERT_EQ(run_cli("assemble" + cfg + " --features \"" + (dir / "ex" / "features.csv").string() + "\" --coupons \"" +
                        (dir / "build" / "coupons.json").string() + "\" --out \"" + (dir / "as").string() + "\"",
                    err),
            0)
      << slurp(err);
  ASSERT_EQ(run_cli("train" + cfg + " --models gaussian_nb,decision_tree --dataset \"" +
                        (dir / "as" / "dataset.csv").string() + "\" --out \"" + (dir / "tr").string() + "\"",
                    err),
            0)
      << slurp(err);
  EXPECT_TRUE(fs::exists(dir / "tr" / "models" / "decision_tree.json"));
  EXPECT_FALSE(fs::exists(dir / "tr" / "models" / "bagging.json"));
  ASSERT_EQ(run_cli("importance" + cfg + " --model \"" + (dir / "tr" / "models" / "decision_tree.json").string() +
                        "\" --dataset \"" + (dir / "tr" / "test_scaled.csv").string() + "\" --out \"" +
                        (dir / "im").string() + "\"",
                    err),
            0)
      << slurp(err);
  EXPECT_TRUE(fs::exists(dir / "im" / "importance.csv"));

  const auto missing = (dir / "nowhere.csv").string();
  EXPECT_NE(run_cli("train --dataset \"" + missing + "\" --out \"" + (dir / "x").string() + "\"", err), 0);
  const auto j = nlohmann::json::parse(slurp(err));
  EXPECT_EQ(j.at("error").at("command"), "train");
  EXPECT_EQ(j.at("error").at("kind"), "io");
  EXPECT_EQ(j.at("error").at("path"), missing);

  EXPECT_NE(run_cli("train --models nonsense --dataset \"" + (dir / "as" / "dataset.csv").string() + "\" --out \"" +
                        (dir / "y").string() + "\"",
                    err),
            0);
  EXPECT_EQ(nlohmann::json::parse(slurp(err)).at("error").at("kind"), "invalid_input");
}

TEST(Pipeline, ImportanceOnAllRows) {
  RunConfig c = small_config();
  c.merge({{"importance.set", "all"}, {"train.models", "decision_tree,bagging"}});
  EXPECT_THROW(c.merge({{"importance.set", "validation"}}), Error);
  const auto dir = fresh("impall");
  cmd_run(c, dir);
  const Dataset all = load_csv((dir / "importance" / "all_scaled.csv").string());
  const Dataset tr = load_csv((dir / "train" / "train_scaled.csv").string());
  const Dataset te = load_csv((dir / "train" / "test_scaled.csv").string());
  EXPECT_EQ(all.size(), tr.size() + te.size());
  EXPECT_TRUE(fs::exists(dir / "importance" / "importance.csv"));
}
