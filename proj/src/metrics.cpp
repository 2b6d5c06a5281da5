#include "mia/metrics.hpp"

#include <unordered_set>

#include "mia/error.hpp"

namespace mia {

MetricsRow compute_metrics(const ConfusionCounts& c, std::uint64_t iteration) {
  if (c.total() == 0) throw ConfigError("confusion counts are all zero");
  MetricsRow row;
  row.iteration = iteration;
  auto ratio = [&row](std::uint64_t num, std::uint64_t den) {
    if (den == 0) {
      row.degenerate = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  row.recall = ratio(c.tp, c.tp + c.fn);
  row.success_rate = row.recall;
  row.accuracy = ratio(c.tp + c.tn, c.total());
  row.precision = ratio(c.tp, c.tp + c.fp);
  row.fpr = ratio(c.fp, c.fp + c.tn);
  const double pr = row.precision + row.recall;
  if (pr == 0.0) {
    row.degenerate = true;
    row.f1 = 0.0;
  } else {
    row.f1 = 2.0 * row.precision * row.recall / pr;
  }
  return row;
}

ConfusionCounts confusion_from_predictions(std::span<const std::uint64_t> predicted,
                                           std::span<const std::uint64_t> truth,
                                           std::span<const std::uint64_t> all) {
  const std::unordered_set<std::uint64_t> universe(all.begin(), all.end());
  const std::unordered_set<std::uint64_t> pred(predicted.begin(), predicted.end());
  const std::unordered_set<std::uint64_t> actual(truth.begin(), truth.end());
  for (auto id : pred)
    if (!universe.contains(id)) throw ConfigError("predicted id " + std::to_string(id) + " outside universe");
  for (auto id : actual)
    if (!universe.contains(id)) throw ConfigError("true id " + std::to_string(id) + " outside universe");

  ConfusionCounts c;
  for (auto id : universe) {
    const bool p = pred.contains(id);
    const bool t = actual.contains(id);
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

}  // namespace mia
