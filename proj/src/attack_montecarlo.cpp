#include "mia/attack_montecarlo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "mia/error.hpp"
#include "mia/parallel.hpp"
#include "mia/rng.hpp"

namespace mia {

std::string DistanceMetric::name() const {
  return kind == DistanceKind::euclidean_raw ? "euclidean" : "tonal";
}

DistanceMetric DistanceMetric::parse(const std::string& name) {
  if (name == "euclidean" || name == "euclidean_raw") return {DistanceKind::euclidean_raw};
  if (name == "tonal" || name == "tonal_centroid") return {DistanceKind::tonal_centroid};
  throw ConfigError("unknown distance metric: " + name);
}

EpsilonHeuristic EpsilonHeuristic::percentile(double q) {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("percentile q must lie in (0, 1)");
  return {Kind::percentile, q};
}

EpsilonHeuristic EpsilonHeuristic::parse(const std::string& text) {
  if (text == "median") return median();
  if (text.rfind("p:", 0) == 0) {
    double q = 0.0;
    try {
      std::size_t used = 0;
      q = std::stod(text.substr(2), &used);
      if (used != text.size() - 2) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw ConfigError("bad percentile heuristic: " + text);
    }
    return percentile(q);
  }
  throw ConfigError("unknown heuristic: " + text + " (expected median or p:Q)");
}

std::string EpsilonHeuristic::name() const {
  if (kind == Kind::median) return "median";
  std::ostringstream os;
  os << "p:" << q;
  return os.str();
}

std::array<double, 6> tonal_centroid(const std::array<double, 12>& profile) {
  const double mass = std::accumulate(profile.begin(), profile.end(), 0.0);
  std::array<double, 6> c{};
  if (mass <= 0.0) return c;
  constexpr double pi = std::numbers::pi;
  constexpr std::array<double, 3> radius{1.0, 1.0, 0.5};
  constexpr std::array<double, 3> angle{7.0 * pi / 6.0, 3.0 * pi / 2.0, 2.0 * pi / 3.0};
  for (int l = 0; l < 12; ++l) {
    const double w = profile[l] / mass;
    if (w == 0.0) continue;
    for (int k = 0; k < 3; ++k) {
      c[2 * k] += w * radius[k] * std::sin(l * angle[k]);
      c[2 * k + 1] += w * radius[k] * std::cos(l * angle[k]);
    }
  }
  return c;
}

namespace {

double centroid_gap(const std::array<double, 6>& a, const std::array<double, 6>& b) {
  double s = 0.0;
  for (int k = 0; k < 6; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

// Per-roll precomputation for the hot loop: packed bits for the raw metric,
// per-step centroids for the tonal one.
struct Encoded {
  std::vector<std::uint64_t> bits;
  std::vector<std::array<double, 6>> centroids;
};

Encoded encode(const DistanceMetric& metric, const Pianoroll& roll) {
  Encoded e;
  const auto cells = roll.cells();
  if (metric.kind == DistanceKind::euclidean_raw) {
    e.bits.assign((cells.size() + 63) / 64, 0);
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (cells[i]) e.bits[i / 64] |= std::uint64_t{1} << (i % 64);
  } else {
    const auto& s = roll.shape();
    e.centroids.reserve(s.steps_total());
    for (std::uint32_t t = 0; t < s.tracks; ++t)
      for (std::uint32_t b = 0; b < s.bars; ++b)
        for (std::uint32_t st = 0; st < s.steps_per_bar; ++st)
          e.centroids.push_back(tonal_centroid(pitch_class_profile(roll, t, b, st)));
  }
  return e;
}

double encoded_distance(const DistanceMetric& metric, const Encoded& a, const Encoded& b) {
  if (metric.kind == DistanceKind::euclidean_raw) {
    std::uint64_t h = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) h += std::popcount(a.bits[i] ^ b.bits[i]);
    return std::sqrt(static_cast<double>(h));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.centroids.size(); ++i) sum += centroid_gap(a.centroids[i], b.centroids[i]);
  return sum / static_cast<double>(a.centroids.size());
}

std::vector<std::size_t> draw_without_replacement(std::size_t population, std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + uniform_index(rng, population - i)]);
  idx.resize(n);
  return idx;
}

}  // namespace

double distance(const DistanceMetric& metric, const Pianoroll& a, const Pianoroll& b) {
  if (a.shape() != b.shape()) throw FormatError("pianoroll shapes differ");
  if (metric.kind == DistanceKind::euclidean_raw) {
    const auto fa = flatten(a);
    const auto fb = flatten(b);
    double s = 0.0;
    for (std::size_t i = 0; i < fa.size(); ++i) s += (fa[i] - fb[i]) * (fa[i] - fb[i]);
    return std::sqrt(s);
  }
  const auto& s = a.shape();
  double sum = 0.0;
  for (std::uint32_t t = 0; t < s.tracks; ++t)
    for (std::uint32_t bar = 0; bar < s.bars; ++bar)
      for (std::uint32_t st = 0; st < s.steps_per_bar; ++st)
        sum += centroid_gap(tonal_centroid(pitch_class_profile(a, t, bar, st)),
                            tonal_centroid(pitch_class_profile(b, t, bar, st)));
  return sum / static_cast<double>(s.steps_total());
}

double epsilon_from_heuristic(std::span<const double> distances, const EpsilonHeuristic& heuristic) {
  if (distances.empty()) throw ConfigError("epsilon heuristic needs at least one distance");
  const std::size_t k = distances.size();
  std::size_t rank;  // 1-based
  if (heuristic.kind == EpsilonHeuristic::Kind::median) {
    rank = (k + 1) / 2;
  } else {
    const double r = std::ceil(heuristic.q * static_cast<double>(k));
    rank = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(r, 1.0)), 1, k);
  }
  std::vector<double> work(distances.begin(), distances.end());
  std::nth_element(work.begin(), work.begin() + static_cast<std::ptrdiff_t>(rank - 1), work.end());
  return work[rank - 1];
}

Stash build_stash(const SampleFn& sample_fn, std::size_t size, std::uint64_t seed,
                  std::string provenance) {
  if (size == 0) throw ConfigError("stash size must be >= 1");
  Stash s;
  s.seed = seed;
  s.provenance = std::move(provenance);
  s.rolls.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    s.rolls.push_back(sample_fn(derive_seed(seed, i)));
    if (s.rolls.back().shape() != s.rolls.front().shape()) throw FormatError("stash rolls differ in shape");
  }
  return s;
}

void McConfig::validate() const {
  if (stash_size == 0 || n_per_query == 0 || subset_size == 0 || trials == 0)
    throw ConfigError("Monte Carlo counts must be >= 1");
  if (n_per_query > stash_size) throw ConfigError("n_per_query exceeds stash size");
}

std::vector<std::size_t> draw_stash_indices(std::size_t stash_size, std::size_t n, std::uint64_t seed) {
  if (n > stash_size) throw ConfigError("n_per_query exceeds stash size");
  Rng rng(seed);
  return draw_without_replacement(stash_size, n, rng);
}

double mc_score(const Pianoroll& candidate, const Stash& stash, const McConfig& config, double eps,
                std::uint64_t seed) {
  if (!(eps >= 0.0)) throw ConfigError("epsilon must be >= 0");
  if (config.n_per_query == 0) throw ConfigError("n_per_query must be >= 1");
  const auto idx = draw_stash_indices(stash.size(), config.n_per_query, seed);
  std::size_t hits = 0;
  for (std::size_t i : idx)
    if (distance(config.metric, stash.rolls[i], candidate) <= eps) ++hits;
  return static_cast<double>(hits) / static_cast<double>(idx.size());
}

std::uint64_t candidate_query_seed(const McConfig& config, std::size_t trial, std::size_t position) {
  return derive_seed(derive_seed(config.seed, trial), 2 + position);
}

std::vector<std::size_t> select_top(std::span<const CandidateScore> candidates, std::size_t m) {
  if (m > candidates.size()) throw ConfigError("cannot select more candidates than exist");
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = candidates[a];
    const auto& y = candidates[b];
    if (x.score != y.score) return x.score > y.score;
    if (x.mean_distance != y.mean_distance) return x.mean_distance < y.mean_distance;
    if (x.id != y.id) return x.id < y.id;
    return a < b;
  });
  order.resize(m);
  return order;
}

SetLabel set_label_for(std::size_t train_in_top, std::size_t m) {
  const std::size_t test_in_top = m - train_in_top;
  if (train_in_top > test_in_top) return SetLabel::correct;
  if (train_in_top < test_in_top) return SetLabel::incorrect;
  return SetLabel::tie;
}

McResult run_montecarlo(const Dataset& train_rolls, const Dataset& test_rolls, const Stash& stash,
                        const McConfig& config, unsigned threads) {
  config.validate();
  train_rolls.validate();
  test_rolls.validate();
  if (stash.size() == 0) throw ConfigError("stash is empty");
  if (config.n_per_query > stash.size()) throw ConfigError("n_per_query exceeds stash size");
  const std::size_t m = config.subset_size;
  if (train_rolls.size() < m || test_rolls.size() < m)
    throw ConfigError("not enough records for subset size M=" + std::to_string(m));
  if (train_rolls.shape != test_rolls.shape || stash.rolls.front().shape() != train_rolls.shape)
    throw FormatError("train, test and stash shapes differ");

  const auto& metric = config.metric;
  std::vector<Encoded> stash_enc(stash.size());
  parallel_for(stash.size(), [&](std::size_t i) { stash_enc[i] = encode(metric, stash.rolls[i]); }, threads);
  std::vector<Encoded> train_enc(train_rolls.size()), test_enc(test_rolls.size());
  parallel_for(train_rolls.size(), [&](std::size_t i) { train_enc[i] = encode(metric, train_rolls.rolls[i]); }, threads);
  parallel_for(test_rolls.size(), [&](std::size_t i) { test_enc[i] = encode(metric, test_rolls.rolls[i]); }, threads);

  McResult res;
  std::size_t single_hits = 0;
  std::size_t set_correct = 0;
  const std::size_t n = config.n_per_query;

  for (std::size_t t = 0; t < config.trials; ++t) {
    const std::uint64_t trial_seed = derive_seed(config.seed, t);
    Rng train_rng(derive_seed(trial_seed, 0));
    Rng test_rng(derive_seed(trial_seed, 1));
    const auto train_pick = draw_without_replacement(train_rolls.size(), m, train_rng);
    const auto test_pick = draw_without_replacement(test_rolls.size(), m, test_rng);

    // Candidate positions [0, M) are train records, [M, 2M) test records.
    std::vector<double> dists(2 * m * n);
    parallel_for(
        2 * m,
        [&](std::size_t j) {
          const Encoded& cand = j < m ? train_enc[train_pick[j]] : test_enc[test_pick[j - m]];
          const auto idx = draw_stash_indices(stash.size(), n, candidate_query_seed(config, t, j));
          for (std::size_t k = 0; k < n; ++k) dists[j * n + k] = encoded_distance(metric, stash_enc[idx[k]], cand);
        },
        threads);

    const double eps = epsilon_from_heuristic(dists, config.heuristic);

    std::vector<CandidateScore> scores(2 * m);
    for (std::size_t j = 0; j < 2 * m; ++j) {
      std::size_t hits = 0;
      double sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double d = dists[j * n + k];
        sum += d;
        if (d <= eps) ++hits;
      }
      scores[j].id = j < m ? train_rolls.ids[train_pick[j]] : test_rolls.ids[test_pick[j - m]];
      scores[j].score = static_cast<double>(hits) / static_cast<double>(n);
      scores[j].mean_distance = sum / static_cast<double>(n);
    }

    const auto top = select_top(scores, m);
    McTrial rec;
    rec.trial = t;
    rec.epsilon = eps;
    rec.train_in_top = static_cast<std::size_t>(std::count_if(top.begin(), top.end(), [m](std::size_t j) { return j < m; }));
    rec.single_accuracy = static_cast<double>(rec.train_in_top) / static_cast<double>(m);
    rec.set_label = set_label_for(rec.train_in_top, m);
    for (std::size_t j = 0; j < m; ++j) {
      rec.train_ids.push_back(scores[j].id);
      rec.test_ids.push_back(scores[m + j].id);
    }
    single_hits += rec.train_in_top;
    if (rec.set_label == SetLabel::correct) ++set_correct;
    res.trials.push_back(std::move(rec));
  }

  res.single_mi_accuracy = static_cast<double>(single_hits) / static_cast<double>(m * config.trials);
  res.set_mi_correct_fraction = static_cast<double>(set_correct) / static_cast<double>(config.trials);
  return res;
}

double single_mi(const Dataset& train_rolls, const Dataset& test_rolls, const Stash& stash,
                 const McConfig& config) {
  return run_montecarlo(train_rolls, test_rolls, stash, config).single_mi_accuracy;
}

double set_mi(const Dataset& train_rolls, const Dataset& test_rolls, const Stash& stash,
              const McConfig& config) {
  return run_montecarlo(train_rolls, test_rolls, stash, config).set_mi_correct_fraction;
}

}  // namespace mia
