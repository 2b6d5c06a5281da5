#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mia/pianoroll.hpp"

namespace mia {

enum class DistanceKind { euclidean_raw, tonal_centroid };

struct DistanceMetric {
  DistanceKind kind = DistanceKind::euclidean_raw;

  /// "euclidean" or "tonal"; the names used by the CLI and the MC table.
  std::string name() const;
  static DistanceMetric parse(const std::string& name);
};

struct EpsilonHeuristic {
  enum class Kind { median, percentile };
  Kind kind = Kind::median;
  double q = 0.5;  // only for percentile, in (0, 1)

  static EpsilonHeuristic median() { return {Kind::median, 0.5}; }
  static EpsilonHeuristic percentile(double q);
  /// "median" or "p:Q", e.g. "p:0.001".
  static EpsilonHeuristic parse(const std::string& text);
  std::string name() const;
};

/// 6-D tonal centroid of a 12-bin pitch-class profile (normalised by its L1 mass);
/// an all-zero profile maps to the origin.
std::array<double, 6> tonal_centroid(const std::array<double, 12>& profile);

/// euclidean_raw: L2 norm of the flattened difference (sqrt of the Hamming distance).
/// tonal_centroid: mean over all (track, bar, step) of the centroid distance.
double distance(const DistanceMetric& metric, const Pianoroll& a, const Pianoroll& b);

/// Median is the lower median; percentile(q) is the value at ascending rank ceil(q * K),
/// clamped to [1, K]. Throws ConfigError on an empty input.
double epsilon_from_heuristic(std::span<const double> distances, const EpsilonHeuristic& heuristic);

struct Stash {
  std::vector<Pianoroll> rolls;
  std::string provenance;
  std::uint64_t seed = 0;

  std::size_t size() const { return rolls.size(); }
};

using SampleFn = std::function<Pianoroll(std::uint64_t seed)>;

/// Sample i is sample_fn(derive_seed(seed, i)).
Stash build_stash(const SampleFn& sample_fn, std::size_t size, std::uint64_t seed,
                  std::string provenance = {});

struct McConfig {
  std::size_t stash_size = 1000;
  std::size_t n_per_query = 1000;
  EpsilonHeuristic heuristic = EpsilonHeuristic::median();
  DistanceMetric metric;
  std::size_t subset_size = 100;  // M
  std::size_t trials = 20;        // R
  std::uint64_t seed = 0;

  void validate() const;
};

/// n distinct stash indices drawn uniformly without replacement from `seed`.
std::vector<std::size_t> draw_stash_indices(std::size_t stash_size, std::size_t n, std::uint64_t seed);

/// Fraction of the n_per_query drawn stash samples within distance eps of the candidate.
double mc_score(const Pianoroll& candidate, const Stash& stash, const McConfig& config, double eps,
                std::uint64_t seed);

/// Seed used for candidate `position` of trial `trial`; mc_score with it reproduces
/// the per-candidate score of that trial.
std::uint64_t candidate_query_seed(const McConfig& config, std::size_t trial, std::size_t position);

enum class SetLabel { correct, incorrect, tie };

struct McTrial {
  std::size_t trial = 0;
  double epsilon = 0.0;
  std::size_t train_in_top = 0;
  double single_accuracy = 0.0;
  SetLabel set_label = SetLabel::tie;
  std::vector<std::uint64_t> train_ids;
  std::vector<std::uint64_t> test_ids;
};

struct McResult {
  double single_mi_accuracy = 0.0;
  double set_mi_correct_fraction = 0.0;
  std::vector<McTrial> trials;
};

/// Runs R trials. Each trial draws M train and M test records, pools all candidate-to-
/// drawn-stash distances to set epsilon, scores the 2M candidates and keeps the top M by
/// (score desc, mean distance asc, id asc). Single MI is the train share of that set; Set MI
/// calls a trial correct when train records are the strict majority of it.
McResult run_montecarlo(const Dataset& train_rolls, const Dataset& test_rolls, const Stash& stash,
                        const McConfig& config, unsigned threads = 0);

double single_mi(const Dataset& train_rolls, const Dataset& test_rolls, const Stash& stash,
                 const McConfig& config);
double set_mi(const Dataset& train_rolls, const Dataset& test_rolls, const Stash& stash,
              const McConfig& config);

/// Selection and labelling step of one trial on precomputed per-candidate values;
/// returns the positions of the selected candidates. Exposed for direct testing.
struct CandidateScore {
  std::uint64_t id = 0;
  double score = 0.0;
  double mean_distance = 0.0;
};
std::vector<std::size_t> select_top(std::span<const CandidateScore> candidates, std::size_t m);
SetLabel set_label_for(std::size_t train_in_top, std::size_t m);

}  // namespace mia
