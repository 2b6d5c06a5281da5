#include "mia/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "mia/attack_whitebox.hpp"
#include "mia/binary_io.hpp"
#include "mia/error.hpp"
#include "mia/rng.hpp"

namespace mia {

namespace fs = std::filesystem;
using nlohmann::json;

// --- configuration ---------------------------------------------------------------

namespace {

json mc_to_json(const McConfig& c) {
  return {{"stash_size", c.stash_size}, {"n_per_query", c.n_per_query},
          {"heuristic", c.heuristic.name()}, {"metric", c.metric.name()},
          {"subset_size", c.subset_size}, {"trials", c.trials}, {"seed", c.seed}};
}

McConfig mc_from_json(const json& j) {
  McConfig c;
  c.stash_size = j.value("stash_size", c.stash_size);
  c.n_per_query = j.value("n_per_query", c.n_per_query);
  c.heuristic = EpsilonHeuristic::parse(j.value("heuristic", std::string("median")));
  c.metric = DistanceMetric::parse(j.value("metric", std::string("euclidean")));
  c.subset_size = j.value("subset_size", c.subset_size);
  c.trials = j.value("trials", c.trials);
  c.seed = j.value("seed", c.seed);
  return c;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (schema_version != kConfigSchemaVersion)
    throw ConfigError("unsupported config schema_version " + std::to_string(schema_version));
  if (label != "default" && label != "overfitted" && label != "custom")
    throw ConfigError("label must be default, overfitted or custom");
  if (label == "default" && split.train_fraction != 0.5)
    throw ConfigError("label default requires train_fraction 0.5");
  if (label == "overfitted") {
    if (split.train_fraction != 0.1) throw ConfigError("label overfitted requires train_fraction 0.1");
    if (!paired_default_iterations)
      throw ConfigError("label overfitted requires paired_default_iterations");
    if (train.iterations != 10 * *paired_default_iterations)
      throw ConfigError("label overfitted requires 10x the paired default iterations");
  }
  if (!dataset.path) {
    dataset.shape.validate();
    if (dataset.count < 2) throw ConfigError("synthetic dataset needs at least 2 rolls");
  }
  if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0))
    throw ConfigError("train_fraction must lie in (0, 1)");
  train.validate();
  for (const auto& m : mc) m.validate();
  if (output_dir.empty()) throw ConfigError("output_dir must be set");
}

json ExperimentConfig::to_json() const {
  json ds;
  if (dataset.path) {
    ds["path"] = dataset.path->string();
  } else {
    ds["synthetic"] = {{"count", dataset.count}, {"shape", mia::to_json(dataset.shape)},
                       {"style", mia::to_json(dataset.style)}, {"seed", dataset.seed}};
  }
  json mcs = json::array();
  for (const auto& m : mc) mcs.push_back(mc_to_json(m));
  json j = {{"schema_version", schema_version},
            {"label", label},
            {"dataset", ds},
            {"split", {{"train_fraction", split.train_fraction}, {"seed", split.seed}}},
            {"train", train.to_json()},
            {"attacks", {{"whitebox", whitebox}, {"mc", mcs}}},
            {"output_dir", output_dir.string()}};
  if (paired_default_iterations) j["paired_default_iterations"] = *paired_default_iterations;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  try {
    c.schema_version = j.at("schema_version").get<int>();
    c.label = j.value("label", c.label);
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      if (d.contains("path")) {
        c.dataset.path = d.at("path").get<std::string>();
      } else if (d.contains("synthetic")) {
        const auto& s = d.at("synthetic");
        c.dataset.count = s.value("count", c.dataset.count);
        if (s.contains("shape")) c.dataset.shape = shape_from_json(s.at("shape"));
        if (s.contains("style")) c.dataset.style = style_from_json(s.at("style"));
        c.dataset.seed = s.value("seed", c.dataset.seed);
      } else {
        throw ConfigError("dataset needs either path or synthetic");
      }
    }
    if (j.contains("split")) {
      c.split.train_fraction = j.at("split").value("train_fraction", c.split.train_fraction);
      c.split.seed = j.at("split").value("seed", c.split.seed);
    }
    if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
    if (j.contains("paired_default_iterations"))
      c.paired_default_iterations = j.at("paired_default_iterations").get<std::size_t>();
    if (j.contains("attacks")) {
      const auto& a = j.at("attacks");
      c.whitebox = a.value("whitebox", c.whitebox);
      if (a.contains("mc"))
        for (const auto& m : a.at("mc")) c.mc.push_back(mc_from_json(m));
    }
    c.output_dir = j.value("output_dir", c.output_dir.string());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  return ExperimentConfig::from_json(j);
}

ExperimentConfig preset_config(const std::string& label) {
  ExperimentConfig c;
  c.dataset.count = 2000;
  c.dataset.seed = 1;
  c.split.seed = 2;
  c.train.seed = 3;
  McConfig mc;
  mc.stash_size = 1000;
  mc.n_per_query = 1000;
  mc.subset_size = 100;
  mc.trials = 20;
  mc.seed = 4;
  c.mc.push_back(mc);
  if (label == "default") {
    c.label = "default";
    c.split.train_fraction = 0.5;
    c.train.iterations = 2000;
    c.train.checkpoint_every = 200;
    c.output_dir = "out/default";
  } else if (label == "overfitted") {
    c.label = "overfitted";
    c.split.train_fraction = 0.1;
    c.train.iterations = 20000;
    c.train.checkpoint_every = 2000;
    c.paired_default_iterations = 2000;
    c.output_dir = "out/overfitted";
  } else {
    throw ConfigError("unknown preset: " + label);
  }
  c.validate();
  return c;
}

// --- reports -----------------------------------------------------------------------

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string format_wb_csv(std::span<const MetricsRow> rows) {
  if (rows.empty()) throw ConfigError("no rows");
  std::string out(kWbCsvHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.iteration);
    for (double v : {r.success_rate, r.accuracy, r.precision, r.recall, r.fpr, r.f1}) {
      out += ',';
      out += fixed3(v);
    }
    out += '\n';
  }
  return out;
}

std::string format_mc_csv(std::span<const McRow> rows) {
  if (rows.empty()) throw ConfigError("no rows");
  std::string out(kMcCsvHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.epochs) + ',' + fixed3(r.single_mi_accuracy) + ',' +
           fixed3(r.set_mi_accuracy) + ',' + r.heuristic + ',' + r.metric + ',' +
           std::to_string(r.trials) + '\n';
  }
  return out;
}

std::string format_success_csv(const ReportTables& tables) {
  // Keyed by iteration; the first Monte Carlo configuration stands for the series.
  std::map<std::uint64_t, std::array<std::string, 3>> series;
  for (const auto& r : tables.whitebox) series[r.iteration][0] = fixed3(r.success_rate);
  std::map<std::uint64_t, bool> seen;
  for (const auto& r : tables.montecarlo) {
    if (seen[r.epochs]) continue;
    seen[r.epochs] = true;
    series[r.epochs][1] = fixed3(r.single_mi_accuracy);
    series[r.epochs][2] = fixed3(r.set_mi_accuracy);
  }
  if (series.empty()) throw ConfigError("no rows");
  std::string out(kSuccessCsvHeader);
  out += '\n';
  for (const auto& [it, cols] : series) out += std::to_string(it) + ',' + cols[0] + ',' + cols[1] + ',' + cols[2] + '\n';
  return out;
}

std::string render_markdown(const ReportTables& t) {
  std::ostringstream os;
  os << "# Membership inference report";
  if (!t.label.empty()) os << " (" << t.label << ")";
  os << "\n\n";
  if (!t.config_hash.empty()) os << "Config hash: `" << t.config_hash << "`\n\n";
  if (!t.whitebox.empty()) {
    os << "## White-box discriminator attack\n\n";
    os << "| Iterations | Success Rate | Accuracy | Precision | Recall/TPR | FPR | F1 |\n";
    os << "|---:|---:|---:|---:|---:|---:|---:|\n";
    bool degenerate = false;
    for (const auto& r : t.whitebox) {
      os << "| " << r.iteration << " | " << fixed3(r.success_rate) << " | " << fixed3(r.accuracy) << " | "
         << fixed3(r.precision) << " | " << fixed3(r.recall) << " | " << fixed3(r.fpr) << " | "
         << fixed3(r.f1) << " |\n";
      degenerate = degenerate || r.degenerate;
    }
    if (degenerate) os << "\nSome ratios had a zero denominator and are reported as 0.000.\n";
    os << "\n";
  }
  if (!t.montecarlo.empty()) {
    os << "## Monte Carlo attack\n\n";
    os << "| Epochs | Single MI Accuracy | Set MI Accuracy | Heuristic | Metric | Trials |\n";
    os << "|---:|---:|---:|---|---|---:|\n";
    for (const auto& r : t.montecarlo)
      os << "| " << r.epochs << " | " << fixed3(r.single_mi_accuracy) << " | " << fixed3(r.set_mi_accuracy)
         << " | " << r.heuristic << " | " << r.metric << " | " << r.trials << " |\n";
    os << "\n";
  }
  return os.str();
}

std::vector<fs::path> emit_reports(const ReportTables& tables, const fs::path& dir) {
  if (tables.whitebox.empty() && tables.montecarlo.empty()) throw ConfigError("no rows");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<fs::path> written;
  auto put = [&](const std::string& name, const std::string& text) {
    const fs::path p = dir / name;
    write_text_file(p, text);
    written.push_back(p);
  };
  if (!tables.whitebox.empty()) put("wb_metrics.csv", format_wb_csv(tables.whitebox));
  if (!tables.montecarlo.empty()) put("mc_metrics.csv", format_mc_csv(tables.montecarlo));
  put("success_vs_iteration.csv", format_success_csv(tables));
  put("report.md", render_markdown(tables));
  return written;
}

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& path, std::string_view header) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || line != header) throw FormatError("unexpected CSV header in " + path.string());
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cols.push_back(cell);
    rows.push_back(std::move(cols));
  }
  return rows;
}

double to_double(const std::string& s, const fs::path& path) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw FormatError("bad number '" + s + "' in " + path.string());
  }
}

}  // namespace

ReportTables read_report_tables(const fs::path& dir) {
  ReportTables t;
  const fs::path wb = dir / "wb_metrics.csv";
  const fs::path mc = dir / "mc_metrics.csv";
  if (fs::exists(wb)) {
    for (const auto& c : read_csv(wb, kWbCsvHeader)) {
      if (c.size() != 7) throw FormatError("bad row in " + wb.string());
      MetricsRow r;
      r.iteration = static_cast<std::uint64_t>(to_double(c[0], wb));
      r.success_rate = to_double(c[1], wb);
      r.accuracy = to_double(c[2], wb);
      r.precision = to_double(c[3], wb);
      r.recall = to_double(c[4], wb);
      r.fpr = to_double(c[5], wb);
      r.f1 = to_double(c[6], wb);
      t.whitebox.push_back(r);
    }
  }
  if (fs::exists(mc)) {
    for (const auto& c : read_csv(mc, kMcCsvHeader)) {
      if (c.size() != 6) throw FormatError("bad row in " + mc.string());
      t.montecarlo.push_back({static_cast<std::uint64_t>(to_double(c[0], mc)), to_double(c[1], mc),
                              to_double(c[2], mc), c[3], c[4], static_cast<std::size_t>(to_double(c[5], mc))});
    }
  }
  const fs::path manifest = dir / "manifest.json";
  if (fs::exists(manifest)) {
    try {
      const auto j = json::parse(read_text_file(manifest));
      t.label = j.value("label", std::string());
      t.config_hash = j.value("config_hash", std::string());
    } catch (const json::exception&) {
      // The tables are still usable without provenance.
    }
  }
  if (t.whitebox.empty() && t.montecarlo.empty()) throw FormatError("no report tables in " + dir.string());
  return t;
}

// --- pipeline stages -------------------------------------------------------------

Dataset materialize_dataset(const DatasetSpec& spec) {
  if (spec.path) return read_dataset(*spec.path);
  return synth_generate(spec.seed, spec.count, spec.shape, spec.style);
}

MetricsRow whitebox_row(const ComposerGan& gan, const Dataset& members, const Dataset& nonmembers,
                        std::uint64_t iteration) {
  auto result = run_whitebox([&gan](std::uint64_t, const Pianoroll& roll) { return d_score(gan, roll); },
                             members, nonmembers);
  return compute_metrics(result.confusion, iteration);
}

Stash generator_stash(const ComposerGan& gan, std::size_t size, std::uint64_t seed, std::string provenance) {
  return build_stash(
      [&gan](std::uint64_t s) {
        Rng rng(s);
        const auto z = sample_latent(gan.arch.latent_dim, rng);
        return g_sample(gan, z);
      },
      size, seed, std::move(provenance));
}

std::uint64_t stash_seed_for(const McConfig& config, std::uint64_t iteration) {
  return derive_seed(config.seed, 0x5A5A0000ULL + iteration);
}

McRow montecarlo_row(const Stash& stash, const Dataset& train, const Dataset& test, const McConfig& config,
                     std::uint64_t iteration) {
  const auto res = run_montecarlo(train, test, stash, config);
  return {iteration, res.single_mi_accuracy, res.set_mi_correct_fraction, config.heuristic.name(),
          config.metric.name(), config.trials};
}

std::map<std::string, double> parse_kv_list(const std::string& text) {
  std::map<std::string, double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value in '" + item + "'");
    const std::string key = item.substr(0, eq);
    try {
      std::size_t used = 0;
      const std::string val = item.substr(eq + 1);
      out[key] = std::stod(val, &used);
      if (used != val.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError("bad number for '" + key + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty key=value list");
  return out;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json platform_info() {
  json p;
#if defined(__clang__)
  p["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  p["compiler"] = std::string("gcc ") + __VERSION__;
#else
  p["compiler"] = "unknown";
#endif
#if defined(__linux__)
  p["os"] = "linux";
#elif defined(__APPLE__)
  p["os"] = "darwin";
#elif defined(_WIN32)
  p["os"] = "windows";
#else
  p["os"] = "unknown";
#endif
  p["pointer_bits"] = sizeof(void*) * 8;
  p["cplusplus"] = static_cast<long>(__cplusplus);
  return p;
}

namespace {

// Files run_experiment owns inside output_dir; --force removes only these.
const std::vector<std::string> kOwnedOutputs{"wb_metrics.csv", "mc_metrics.csv", "success_vs_iteration.csv",
                                             "report.md",      "manifest.json",  "train.prd",
                                             "train.meta.json", "test.prd",      "test.meta.json",
                                             "checkpoints"};

void prepare_output_dir(const fs::path& dir, bool force) {
  std::error_code ec;
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw ConfigError("output directory " + dir.string() + " is not empty; pass --force to overwrite");
    for (const auto& name : kOwnedOutputs) fs::remove_all(dir / name, ec);
  }
  fs::create_directories(dir / "checkpoints", ec);
  if (ec) throw FormatError("cannot create " + dir.string() + ": " + ec.message());
}

std::string checkpoint_name(std::uint64_t iteration) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%08llu.ganc", static_cast<unsigned long long>(iteration));
  return buf;
}

}  // namespace

ExperimentSummary run_experiment(const ExperimentConfig& config, bool force) {
  config.validate();
  const fs::path dir = config.output_dir;
  prepare_output_dir(dir, force);

  // The hash identifies the experiment, so where it is written does not count.
  json hashed = config.to_json();
  hashed.erase("output_dir");
  const std::string config_dump = hashed.dump();
  json manifest = {{"manifest_version", kManifestVersion},
                   {"label", config.label},
                   {"config", config.to_json()},
                   {"config_hash", fnv1a_hex(config_dump)},
                   {"formats", {{"dataset", kDatasetFormatVersion},
                                {"checkpoint", kCheckpointFormatVersion},
                                {"config_schema", kConfigSchemaVersion}}},
                   {"platform", platform_info()}};
  json seeds = {{"dataset", config.dataset.path ? json(nullptr) : json(config.dataset.seed)},
                {"split", config.split.seed},
                {"train", config.train.seed},
                {"train_init", derive_seed(config.train.seed, 0)},
                {"train_sampling", derive_seed(config.train.seed, 1)}};
  json mc_seeds = json::array();
  for (const auto& m : config.mc) mc_seeds.push_back({{"trials", m.seed}});
  seeds["mc"] = mc_seeds;
  manifest["seeds"] = seeds;

  std::string stage = "dataset";
  ExperimentSummary summary;
  summary.tables.label = config.label;
  summary.tables.config_hash = manifest["config_hash"];
  json warnings = json::array();
  try {
    const Dataset data = materialize_dataset(config.dataset);
    stage = "split";
    const auto parts = split(data, config.split);
    write_dataset(parts.train, dir / "train.prd", config.dataset.path ? nullptr : &config.dataset.style);
    write_dataset(parts.test, dir / "test.prd", config.dataset.path ? nullptr : &config.dataset.style);
    manifest["split_sizes"] = {{"train", parts.train.size()}, {"test", parts.test.size()}};

    stage = "train";
    json ckpt_list = json::array();
    const auto checkpoints = train(parts.train, config.train, [&](const Checkpoint& c) {
      const auto name = checkpoint_name(c.iteration);
      save_checkpoint(c, dir / "checkpoints" / name);
      ckpt_list.push_back({{"iteration", c.iteration}, {"file", "checkpoints/" + name}});
    });
    manifest["checkpoints"] = ckpt_list;
    summary.checkpoints = checkpoints.size();

    stage = "attack";
    json stash_seeds = json::array();
    for (const auto& ckpt : checkpoints) {
      const ComposerGan gan = gan_from_checkpoint(ckpt);
      if (config.whitebox) {
        auto row = whitebox_row(gan, parts.train, parts.test, ckpt.iteration);
        if (row.degenerate) warnings.push_back("degenerate white-box metrics at iteration " + std::to_string(ckpt.iteration));
        summary.tables.whitebox.push_back(row);
      }
      for (std::size_t k = 0; k < config.mc.size(); ++k) {
        const auto& mc = config.mc[k];
        const auto seed = stash_seed_for(mc, ckpt.iteration);
        stash_seeds.push_back({{"mc_index", k}, {"iteration", ckpt.iteration}, {"stash_seed", seed}});
        const Stash stash = generator_stash(gan, mc.stash_size, seed, "checkpoint " + std::to_string(ckpt.iteration));
        summary.tables.montecarlo.push_back(montecarlo_row(stash, parts.train, parts.test, mc, ckpt.iteration));
      }
    }
    manifest["seeds"]["stash"] = stash_seeds;

    stage = "report";
    summary.outputs = emit_reports(summary.tables, dir);
    manifest["status"] = "ok";
  } catch (const std::exception& e) {
    manifest["status"] = "failed";
    manifest["failure_stage"] = stage;
    manifest["error"] = e.what();
    manifest["warnings"] = warnings;
    try {
      if (!summary.tables.whitebox.empty() || !summary.tables.montecarlo.empty()) emit_reports(summary.tables, dir);
      write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
    } catch (const std::exception&) {
      // Keep the original error.
    }
    throw;
  }
  manifest["warnings"] = warnings;
  json outputs = json::array();
  for (const auto& p : summary.outputs) outputs.push_back(p.filename().string());
  outputs.push_back("manifest.json");
  manifest["outputs"] = outputs;
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
  summary.outputs.push_back(dir / "manifest.json");
  return summary;
}

}  // namespace mia
