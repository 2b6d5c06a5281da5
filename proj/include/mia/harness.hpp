#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mia/attack_montecarlo.hpp"
#include "mia/gan.hpp"
#include "mia/metrics.hpp"
#include "mia/pianoroll.hpp"

namespace mia {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr int kManifestVersion = 1;

struct DatasetSpec {
  std::optional<std::filesystem::path> path;  // load instead of generating when set
  std::size_t count = 2000;
  PianorollShape shape;
  StyleParams style;
  std::uint64_t seed = 1;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::string label = "custom";  // default | overfitted | custom
  DatasetSpec dataset;
  SplitSpec split{0.5, 2};
  TrainConfig train;
  // Iterations of the paired default model; required for label "overfitted".
  std::optional<std::size_t> paired_default_iterations;
  bool whitebox = true;
  std::vector<McConfig> mc;
  std::filesystem::path output_dir = "out";

  /// Throws ConfigError on schema or invariant violations.
  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// The desk-scale presets: "default" (50:50 split, 2000 iterations, checkpoints every 200)
/// and "overfitted" (10% split, 20000 iterations every 2000).
ExperimentConfig preset_config(const std::string& label);

/// One row of the Monte Carlo table.
struct McRow {
  std::uint64_t epochs = 0;
  double single_mi_accuracy = 0.0;
  double set_mi_accuracy = 0.0;
  std::string heuristic;
  std::string metric;
  std::size_t trials = 0;
};

struct ReportTables {
  std::vector<MetricsRow> whitebox;
  std::vector<McRow> montecarlo;
  std::string label;
  std::string config_hash;
};

inline constexpr std::string_view kWbCsvHeader = "iterations,success_rate,accuracy,precision,recall,fpr,f1";
inline constexpr std::string_view kMcCsvHeader =
    "epochs,single_mi_accuracy,set_mi_accuracy,heuristic,metric,trials";
inline constexpr std::string_view kSuccessCsvHeader =
    "iterations,whitebox_success_rate,single_mi_accuracy,set_mi_accuracy";

/// Fixed-point with three decimals, as used in every emitted table.
std::string fixed3(double v);

/// Both throw ConfigError("no rows") on an empty table.
std::string format_wb_csv(std::span<const MetricsRow> rows);
std::string format_mc_csv(std::span<const McRow> rows);
std::string format_success_csv(const ReportTables& tables);
std::string render_markdown(const ReportTables& tables);

/// Writes wb_metrics.csv / mc_metrics.csv (non-empty tables only), success_vs_iteration.csv
/// and report.md. I/O failures raise FormatError naming the path.
std::vector<std::filesystem::path> emit_reports(const ReportTables& tables,
                                                const std::filesystem::path& output_dir);

/// Re-reads the CSVs written by emit_reports.
ReportTables read_report_tables(const std::filesystem::path& dir);

Dataset materialize_dataset(const DatasetSpec& spec);

MetricsRow whitebox_row(const ComposerGan& gan, const Dataset& members, const Dataset& nonmembers,
                        std::uint64_t iteration);

/// Stash sample i is g_sample(gan, z) with z drawn from derive_seed(seed, i).
Stash generator_stash(const ComposerGan& gan, std::size_t size, std::uint64_t seed,
                      std::string provenance);
/// Stash seed used for checkpoint `iteration` under `config`.
std::uint64_t stash_seed_for(const McConfig& config, std::uint64_t iteration);

McRow montecarlo_row(const Stash& stash, const Dataset& train, const Dataset& test,
                     const McConfig& config, std::uint64_t iteration);

struct ExperimentSummary {
  std::size_t checkpoints = 0;
  ReportTables tables;
  std::vector<std::filesystem::path> outputs;
};

/// dataset -> split -> train with checkpoints -> attacks per checkpoint -> reports and
/// manifest.json. Refuses a non-empty output_dir unless `force`. On failure writes a
/// manifest with the failing stage and rethrows.
ExperimentSummary run_experiment(const ExperimentConfig& config, bool force);

/// Parses "k1=v1,k2=v2" into numbers; used for --oracle.
std::map<std::string, double> parse_kv_list(const std::string& text);

std::string fnv1a_hex(std::string_view bytes);
nlohmann::json platform_info();

}  // namespace mia
