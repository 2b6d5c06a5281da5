#include <filesystem>

#include "doctest.h"
#include "mia/binary_io.hpp"
#include "mia/error.hpp"
#include "mia/harness.hpp"

using namespace mia;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mia_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig tiny_experiment(const fs::path& out) {
  ExperimentConfig c;
  c.label = "custom";
  c.dataset.count = 40;
  c.dataset.shape = {2, 1, 4, 12, 24};
  c.split = {0.5, 2};
  c.train.iterations = 40;
  c.train.checkpoint_every = 20;
  c.train.batch_size = 4;
  c.train.latent_dim = 4;
  c.train.trunk_hidden = 8;
  c.train.discriminator_hidden = {8};
  c.train.seed = 3;
  McConfig mc;
  mc.stash_size = 30;
  mc.n_per_query = 20;
  mc.subset_size = 5;
  mc.trials = 2;
  mc.seed = 4;
  c.mc.push_back(mc);
  c.output_dir = out;
  return c;
}

std::size_t data_lines(const fs::path& csv) {
  const auto text = read_text_file(csv);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) - 1;
}

}  // namespace

TEST_CASE("white-box csv formatting") {
  MetricsRow r{1000, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, false};
  CHECK(format_wb_csv(std::vector<MetricsRow>{r}) ==
        "iterations,success_rate,accuracy,precision,recall,fpr,f1\n1000,0.500,0.500,0.500,0.500,0.500,0.500\n");
  CHECK_THROWS_WITH_AS(format_wb_csv(std::vector<MetricsRow>{}), "no rows", ConfigError);
  CHECK(fixed3(0.1235) == "0.123");
  CHECK(fixed3(1.0) == "1.000");
}

TEST_CASE("monte carlo csv formatting") {
  McRow r{20000, 0.501, 1.0, "median", "euclidean", 1};
  CHECK(format_mc_csv(std::vector<McRow>{r}) ==
        "epochs,single_mi_accuracy,set_mi_accuracy,heuristic,metric,trials\n20000,0.501,1.000,median,euclidean,1\n");
  CHECK_THROWS_WITH_AS(format_mc_csv(std::vector<McRow>{}), "no rows", ConfigError);
}

TEST_CASE("success series joins both attacks by iteration") {
  ReportTables t;
  t.whitebox = {{200, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, false}, {400, 0.52, 0.5, 0.5, 0.5, 0.5, 0.5, false}};
  t.montecarlo = {{200, 0.49, 0.5, "median", "euclidean", 20}, {400, 0.51, 0.6, "median", "euclidean", 20}};
  CHECK(format_success_csv(t) ==
        "iterations,whitebox_success_rate,single_mi_accuracy,set_mi_accuracy\n"
        "200,0.500,0.490,0.500\n400,0.520,0.510,0.600\n");
  const auto md = render_markdown(t);
  CHECK(md.find("| 400 | 0.520 |") != std::string::npos);
}

TEST_CASE("presets and config validation") {
  const auto d = preset_config("default");
  CHECK(d.split.train_fraction == 0.5);
  CHECK(d.train.iterations == 2000);
  CHECK(checkpoint_schedule(d.train.iterations, d.train.checkpoint_every).size() == 10);
  const auto o = preset_config("overfitted");
  CHECK(o.split.train_fraction == 0.1);
  CHECK(o.train.iterations == 10 * d.train.iterations);
  CHECK_THROWS_AS(preset_config("huge"), ConfigError);

  auto bad = d;
  bad.split.train_fraction = 0.4;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = o;
  bad.train.iterations = 19000;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = o;
  bad.paired_default_iterations.reset();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = d;
  bad.schema_version = 7;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = d;
  bad.mc[0].n_per_query = bad.mc[0].stash_size + 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("config json round trip") {
  for (const auto* label : {"default", "overfitted"}) {
    const auto c = preset_config(label);
    const auto j = c.to_json();
    CHECK(ExperimentConfig::from_json(j).to_json() == j);
  }
  auto j = preset_config("default").to_json();
  j["train"]["iterations"] = "many";
  CHECK_THROWS_AS(ExperimentConfig::from_json(j), ConfigError);
}

TEST_CASE("key=value lists") {
  const auto kv = parse_kv_list("p=1,sigma=0.25");
  CHECK(kv.at("p") == 1.0);
  CHECK(kv.at("sigma") == 0.25);
  CHECK_THROWS_AS(parse_kv_list("p"), ConfigError);
  CHECK_THROWS_AS(parse_kv_list("p=x"), ConfigError);
  CHECK_THROWS_AS(parse_kv_list("p=1x"), ConfigError);
  CHECK_THROWS_AS(parse_kv_list(""), ConfigError);
}

TEST_CASE("fnv1a") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("small experiment end to end") {
  const auto dir = scratch_dir("run");
  const auto cfg = tiny_experiment(dir);
  const auto summary = run_experiment(cfg, false);
  CHECK(summary.checkpoints == 2);
  for (const auto* f : {"wb_metrics.csv", "mc_metrics.csv", "success_vs_iteration.csv", "report.md",
                        "manifest.json", "train.prd", "test.prd", "checkpoints/ckpt_00000020.ganc",
                        "checkpoints/ckpt_00000040.ganc"})
    CHECK_MESSAGE(fs::exists(dir / f), f);
  CHECK(data_lines(dir / "wb_metrics.csv") == 2);
  CHECK(data_lines(dir / "mc_metrics.csv") == 2);
  CHECK(data_lines(dir / "success_vs_iteration.csv") == 2);

  const auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  CHECK(manifest["status"] == "ok");
  CHECK(manifest["seeds"]["train"] == 3);
  CHECK(manifest["seeds"]["stash"].size() == 2);
  CHECK(manifest["split_sizes"]["train"] == 20);
  CHECK(ExperimentConfig::from_json(manifest["config"]).to_json() == cfg.to_json());

  const auto tables = read_report_tables(dir);
  CHECK(tables.whitebox.size() == 2);
  CHECK(tables.montecarlo.size() == 2);
  CHECK(tables.whitebox[1].iteration == 40);

  const auto wb = read_file_bytes(dir / "wb_metrics.csv");
  const auto mc = read_file_bytes(dir / "mc_metrics.csv");
  const auto ck = read_file_bytes(dir / "checkpoints/ckpt_00000040.ganc");
  const auto ds = read_file_bytes(dir / "train.prd");

  CHECK_THROWS_AS(run_experiment(cfg, false), ConfigError);
  run_experiment(cfg, true);
  CHECK(read_file_bytes(dir / "wb_metrics.csv") == wb);
  CHECK(read_file_bytes(dir / "mc_metrics.csv") == mc);
  CHECK(read_file_bytes(dir / "checkpoints/ckpt_00000040.ganc") == ck);
  CHECK(read_file_bytes(dir / "train.prd") == ds);
  fs::remove_all(dir);
}

TEST_CASE("failed runs record the failing stage") {
  const auto dir = scratch_dir("fail");
  auto cfg = tiny_experiment(dir);
  cfg.train.lr = 1e200;
  CHECK_THROWS_AS(run_experiment(cfg, false), DivergenceError);
  const auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  CHECK(manifest["status"] == "failed");
  CHECK(manifest["failure_stage"] == "train");
  fs::remove_all(dir);
}

TEST_CASE("shipped configs match the presets") {
  for (const auto* label : {"default", "overfitted"}) {
    const auto path = fs::path(MIA_SOURCE_DIR) / "configs" / (std::string(label) + ".json");
    CHECK(load_experiment_config(path).to_json() == preset_config(label).to_json());
  }
}
