#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mia/metrics.hpp"
#include "mia/pianoroll.hpp"

namespace mia {

struct ScoredCandidate {
  std::uint64_t id = 0;
  double score = 0.0;
  bool is_member = false;  // evaluation only; ranking never reads it
};

struct WbAttackResult {
  std::vector<ScoredCandidate> ranked;
  std::vector<std::uint64_t> predicted_members;
  ConfusionCounts confusion;
};

/// Orders candidates by (score descending, id ascending) and labels the first
/// `n_members` as members. Throws ConfigError unless 0 < n_members <= size.
WbAttackResult rank_and_label(std::vector<ScoredCandidate> scored, std::size_t n_members);

using CandidateScorer = std::function<double(std::uint64_t id, const Pianoroll& roll)>;

/// Scores every roll of both sets (in parallel when `threads` != 1) and ranks with
/// N = |members|. A throwing scorer aborts the run with the candidate id in the message.
WbAttackResult run_whitebox(const CandidateScorer& scorer, const Dataset& members,
                            const Dataset& nonmembers, unsigned threads = 0);

}  // namespace mia
