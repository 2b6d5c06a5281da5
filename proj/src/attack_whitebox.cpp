#include "mia/attack_whitebox.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "mia/error.hpp"
#include "mia/parallel.hpp"

namespace mia {

WbAttackResult rank_and_label(std::vector<ScoredCandidate> scored, std::size_t n_members) {
  if (n_members == 0 || n_members > scored.size())
    throw ConfigError("n_members must satisfy 0 < N <= candidate count");
  std::unordered_set<std::uint64_t> ids;
  for (const auto& c : scored) {
    if (!std::isfinite(c.score)) throw ConfigError("non-finite score for candidate " + std::to_string(c.id));
    if (!ids.insert(c.id).second) throw ConfigError("duplicate candidate id " + std::to_string(c.id));
  }

  std::sort(scored.begin(), scored.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });

  WbAttackResult res;
  res.predicted_members.reserve(n_members);
  for (std::size_t i = 0; i < n_members; ++i) res.predicted_members.push_back(scored[i].id);
  for (std::size_t i = 0; i < scored.size(); ++i) {
    const bool predicted = i < n_members;
    if (predicted && scored[i].is_member) ++res.confusion.tp;
    else if (predicted) ++res.confusion.fp;
    else if (scored[i].is_member) ++res.confusion.fn;
    else ++res.confusion.tn;
  }
  res.ranked = std::move(scored);
  return res;
}

WbAttackResult run_whitebox(const CandidateScorer& scorer, const Dataset& members,
                            const Dataset& nonmembers, unsigned threads) {
  members.validate();
  nonmembers.validate();
  if (members.shape != nonmembers.shape) throw FormatError("member and nonmember shapes differ");
  if (members.size() == 0) throw ConfigError("white-box attack needs at least one member");

  const std::size_t n = members.size() + nonmembers.size();
  std::vector<ScoredCandidate> scored(n);
  parallel_for(
      n,
      [&](std::size_t i) {
        const bool member = i < members.size();
        const Dataset& src = member ? members : nonmembers;
        const std::size_t k = member ? i : i - members.size();
        const std::uint64_t id = src.ids[k];
        double s;
        try {
          s = scorer(id, src.rolls[k]);
        } catch (const Error& e) {
          throw Error(e.kind(), "scorer failed on candidate " + std::to_string(id) + ": " + e.what());
        } catch (const std::exception& e) {
          throw FormatError("scorer failed on candidate " + std::to_string(id) + ": " + e.what());
        }
        scored[i] = {id, s, member};
      },
      threads);
  return rank_and_label(std::move(scored), members.size());
}

}  // namespace mia
