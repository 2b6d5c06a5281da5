// miaudit: command-line front end for dataset generation, GAN training,
// membership-inference attacks and experiment reports.
//
// Exit codes: 0 success, 2 configuration/validation error, 3 data/format error,
// 4 training divergence.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "mia/attack_montecarlo.hpp"
#include "mia/attack_whitebox.hpp"
#include "mia/binary_io.hpp"
#include "mia/error.hpp"
#include "mia/gan.hpp"
#include "mia/harness.hpp"
#include "mia/oracle.hpp"
#include "mia/rng.hpp"

namespace fs = std::filesystem;
using namespace mia;

namespace {

StyleParams style_of(const fs::path& dataset_path) {
  const auto side = sidecar_path(dataset_path);
  if (!fs::exists(side)) return {};
  try {
    const auto j = nlohmann::json::parse(read_text_file(side));
    return style_from_json(j.value("style", nlohmann::json(nullptr)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad dataset sidecar " + side.string() + ": " + e.what());
  }
}

double require_key(const std::map<std::string, double>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ConfigError("--oracle is missing '" + key + "'");
  return it->second;
}

struct AttackArgs {
  std::string checkpoint;
  std::string oracle;
  std::string train;
  std::string test;
  std::string out;
  std::uint64_t seed = 0;
  // Monte Carlo only.
  std::string heuristic = "median";
  std::string metric = "euclidean";
  std::size_t stash = 1000;
  std::size_t n = 1000;
  std::size_t subset = 100;
  std::size_t trials = 20;
};

void check_source(const AttackArgs& a) {
  if (a.checkpoint.empty() == a.oracle.empty())
    throw ConfigError("exactly one of --checkpoint or --oracle is required");
}

int run_attack_wb(const AttackArgs& a) {
  check_source(a);
  const Dataset train = read_dataset(a.train);
  const Dataset test = read_dataset(a.test);
  std::uint64_t iteration = 0;
  WbAttackResult result;
  if (!a.checkpoint.empty()) {
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    iteration = ckpt.iteration;
    const ComposerGan gan = gan_from_checkpoint(ckpt);
    result = run_whitebox([&gan](std::uint64_t, const Pianoroll& r) { return d_score(gan, r); }, train, test);
  } else {
    const auto kv = parse_kv_list(a.oracle);
    OracleDiscriminator oracle;
    oracle.margin = require_key(kv, "margin");
    oracle.score_noise = require_key(kv, "tau");
    oracle.member_ids.insert(train.ids.begin(), train.ids.end());
    oracle.validate();
    result = run_whitebox([&](std::uint64_t id, const Pianoroll&) { return oracle_d_score(oracle, id, a.seed); },
                          train, test);
  }
  const MetricsRow row = compute_metrics(result.confusion, iteration);
  const MetricsRow rows[] = {row};
  const std::string csv = format_wb_csv(rows);
  if (a.out.empty()) std::cout << csv;
  else write_text_file(a.out, csv);
  return 0;
}

int run_attack_mc(const AttackArgs& a) {
  check_source(a);
  const Dataset train = read_dataset(a.train);
  const Dataset test = read_dataset(a.test);
  McConfig cfg;
  cfg.stash_size = a.stash;
  cfg.n_per_query = a.n;
  cfg.heuristic = EpsilonHeuristic::parse(a.heuristic);
  cfg.metric = DistanceMetric::parse(a.metric);
  cfg.subset_size = a.subset;
  cfg.trials = a.trials;
  cfg.seed = a.seed;
  cfg.validate();

  std::uint64_t iteration = 0;
  Stash stash;
  if (!a.checkpoint.empty()) {
    const Checkpoint ckpt = load_checkpoint(a.checkpoint);
    iteration = ckpt.iteration;
    const ComposerGan gan = gan_from_checkpoint(ckpt);
    stash = generator_stash(gan, cfg.stash_size, stash_seed_for(cfg, iteration), a.checkpoint);
  } else {
    const auto kv = parse_kv_list(a.oracle);
    OracleGenerator oracle;
    oracle.memorization_rate = require_key(kv, "p");
    oracle.flip_noise = require_key(kv, "sigma");
    oracle.training_rolls = train;
    oracle.population_style = style_of(a.train);
    oracle.population_seed = derive_seed(a.seed, 0xB0B);
    oracle.validate();
    stash = build_stash([&oracle](std::uint64_t s) { return oracle_generate(oracle, s); }, cfg.stash_size,
                        stash_seed_for(cfg, 0), oracle.describe());
  }
  const McRow row = montecarlo_row(stash, train, test, cfg, iteration);
  const McRow rows[] = {row};
  const std::string csv = format_mc_csv(rows);
  if (a.out.empty()) std::cout << csv;
  else write_text_file(a.out, csv);
  return 0;
}

int run_train(const std::string& config_path, const std::string& out_dir) {
  const ExperimentConfig cfg = load_experiment_config(config_path);
  const fs::path dir = out_dir;
  fs::create_directories(dir / "checkpoints");
  const Dataset data = materialize_dataset(cfg.dataset);
  const auto parts = split(data, cfg.split);
  write_dataset(parts.train, dir / "train.prd", cfg.dataset.path ? nullptr : &cfg.dataset.style);
  write_dataset(parts.test, dir / "test.prd", cfg.dataset.path ? nullptr : &cfg.dataset.style);
  const auto ckpts = train(parts.train, cfg.train, [&](const Checkpoint& c) {
    char name[32];
    std::snprintf(name, sizeof name, "ckpt_%08llu.ganc", static_cast<unsigned long long>(c.iteration));
    save_checkpoint(c, dir / "checkpoints" / name);
    std::cerr << "checkpoint " << c.iteration << " -> " << (dir / "checkpoints" / name).string() << "\n";
  });
  std::cerr << "wrote " << ckpts.size() << " checkpoints\n";
  return 0;
}

void add_attack_common(CLI::App* cmd, AttackArgs& a) {
  cmd->add_option("--checkpoint", a.checkpoint, "Checkpoint file to attack");
  cmd->add_option("--oracle", a.oracle, "Substitute an oracle model, e.g. \"p=1,sigma=0\" or \"margin=1,tau=0.1\"");
  cmd->add_option("--train", a.train, "Member (training) dataset")->required();
  cmd->add_option("--test", a.test, "Non-member (test) dataset")->required();
  cmd->add_option("--out", a.out, "Output CSV (stdout when omitted)");
  cmd->add_option("--seed", a.seed, "Attack seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Membership-inference audit toolkit for pianoroll GANs"};
  app.require_subcommand(1);

  // dataset gen
  auto* dataset = app.add_subcommand("dataset", "Dataset utilities");
  dataset->require_subcommand(1);
  auto* gen = dataset->add_subcommand("gen", "Generate a synthetic pianoroll dataset");
  std::string gen_out;
  std::size_t gen_count = 1000;
  PianorollShape gen_shape;
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "Output dataset file")->required();
  gen->add_option("--count", gen_count, "Number of rolls")->required();
  gen->add_option("--tracks", gen_shape.tracks, "Tracks");
  gen->add_option("--bars", gen_shape.bars, "Bars");
  gen->add_option("--steps", gen_shape.steps_per_bar, "Steps per bar");
  gen->add_option("--pitches", gen_shape.pitches, "Pitch rows");
  gen->add_option("--base-pitch", gen_shape.base_midi_pitch, "MIDI pitch of row 0");
  gen->add_option("--seed", gen_seed, "Generator seed");

  // split
  auto* split_cmd = app.add_subcommand("split", "Split a dataset into train and test parts");
  std::string split_in, split_train, split_test;
  SplitSpec split_spec;
  split_cmd->add_option("--in", split_in, "Input dataset")->required();
  split_cmd->add_option("--fraction", split_spec.train_fraction, "Train fraction in (0,1)")->required();
  split_cmd->add_option("--seed", split_spec.seed, "Split seed");
  split_cmd->add_option("--train", split_train, "Train output")->required();
  split_cmd->add_option("--test", split_test, "Test output")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a GAN from an experiment config");
  std::string train_config, train_out;
  train_cmd->add_option("--config", train_config, "Experiment config JSON")->required();
  train_cmd->add_option("--out-dir", train_out, "Output directory")->required();

  // attack wb / mc
  auto* attack = app.add_subcommand("attack", "Run a membership-inference attack");
  attack->require_subcommand(1);
  AttackArgs wb_args, mc_args;
  auto* wb = attack->add_subcommand("wb", "White-box discriminator attack");
  add_attack_common(wb, wb_args);
  auto* mc = attack->add_subcommand("mc", "Black-box Monte Carlo attack");
  add_attack_common(mc, mc_args);
  mc->add_option("--heuristic", mc_args.heuristic, "median or p:Q");
  mc->add_option("--metric", mc_args.metric, "euclidean or tonal");
  mc->add_option("--stash", mc_args.stash, "Stash size");
  mc->add_option("--n", mc_args.n, "Stash samples per candidate");
  mc->add_option("--subset", mc_args.subset, "Records drawn per side (M)");
  mc->add_option("--trials", mc_args.trials, "Repeated trials (R)");

  // experiment run
  auto* experiment = app.add_subcommand("experiment", "Full pipeline");
  experiment->require_subcommand(1);
  auto* run = experiment->add_subcommand("run", "Run an experiment config end to end");
  std::string run_config;
  bool run_force = false;
  run->add_option("--config", run_config, "Experiment config JSON")->required();
  run->add_flag("--force", run_force, "Overwrite an existing output directory");

  // report
  auto* report = app.add_subcommand("report", "Print the tables of a finished run");
  std::string report_dir, report_format = "md";
  report->add_option("--in-dir", report_dir, "Run output directory")->required();
  report->add_option("--format", report_format, "csv or md")->check(CLI::IsMember({"csv", "md"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      const Dataset ds = synth_generate(gen_seed, gen_count, gen_shape);
      const StyleParams style;
      write_dataset(ds, gen_out, &style);
      return 0;
    }
    if (split_cmd->parsed()) {
      const Dataset ds = read_dataset(split_in);
      const auto parts = split(ds, split_spec);
      const StyleParams style = style_of(split_in);
      write_dataset(parts.train, split_train, &style);
      write_dataset(parts.test, split_test, &style);
      std::cerr << "train " << parts.train.size() << ", test " << parts.test.size() << "\n";
      return 0;
    }
    if (train_cmd->parsed()) return run_train(train_config, train_out);
    if (wb->parsed()) return run_attack_wb(wb_args);
    if (mc->parsed()) return run_attack_mc(mc_args);
    if (run->parsed()) {
      const auto summary = run_experiment(load_experiment_config(run_config), run_force);
      std::cerr << "completed " << summary.checkpoints << " checkpoints\n";
      for (const auto& p : summary.outputs) std::cerr << "  " << p.string() << "\n";
      return 0;
    }
    if (report->parsed()) {
      const ReportTables t = read_report_tables(report_dir);
      if (report_format == "md") {
        std::cout << render_markdown(t);
      } else {
        if (!t.whitebox.empty()) std::cout << format_wb_csv(t.whitebox);
        if (!t.whitebox.empty() && !t.montecarlo.empty()) std::cout << "\n";
        if (!t.montecarlo.empty()) std::cout << format_mc_csv(t.montecarlo);
      }
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
