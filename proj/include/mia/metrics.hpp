#pragma once

#include <cstdint>
#include <span>

namespace mia {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// One row of the white-box tables. Success rate is tp / (tp + fn), i.e. recall.
struct MetricsRow {
  std::uint64_t iteration = 0;
  double success_rate = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double fpr = 0.0;
  double f1 = 0.0;
  // Set when some ratio had a zero denominator and was reported as 0.0.
  bool degenerate = false;
};

/// Throws ConfigError when all four counts are zero. A 0/0 ratio becomes 0.0 and sets
/// `degenerate`.
MetricsRow compute_metrics(const ConfusionCounts& c, std::uint64_t iteration);

/// Counts from id sets. Throws ConfigError if a predicted or true id is not in `all`.
ConfusionCounts confusion_from_predictions(std::span<const std::uint64_t> predicted,
                                           std::span<const std::uint64_t> truth,
                                           std::span<const std::uint64_t> all);

}  // namespace mia
