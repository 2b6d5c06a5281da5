#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>

#include "mia/pianoroll.hpp"

namespace mia {

// Ground-truth leaky models. A memorisation rate or score margin of zero makes
// them independent of membership, which gives attacks a known-null baseline.

struct OracleGenerator {
  double memorization_rate = 0.0;  // p: chance of replaying a training roll
  double flip_noise = 0.0;         // sigma: per-cell flip chance on replayed rolls
  Dataset training_rolls;
  StyleParams population_style;
  std::uint64_t population_seed = 0;

  void validate() const;
  std::string describe() const;
};

/// With probability p, a uniformly chosen training roll with each cell flipped with
/// probability sigma; otherwise a fresh population roll. Pure in (oracle, seed).
Pianoroll oracle_generate(const OracleGenerator& oracle, std::uint64_t seed);

struct OracleDiscriminator {
  double margin = 0.0;       // m
  double score_noise = 0.0;  // tau, Gaussian standard deviation
  std::unordered_set<std::uint64_t> member_ids;

  void validate() const;
  std::string describe() const;
};

/// m * [id is a member] + N(0, tau^2), with the noise drawn from (seed, id).
double oracle_d_score(const OracleDiscriminator& oracle, std::uint64_t id, std::uint64_t seed);

}  // namespace mia
