#include "mia/oracle.hpp"

#include <cmath>
#include <sstream>

#include "mia/error.hpp"
#include "mia/rng.hpp"

namespace mia {

void OracleGenerator::validate() const {
  if (!(memorization_rate >= 0.0 && memorization_rate <= 1.0))
    throw ConfigError("oracle memorization rate must lie in [0, 1]");
  if (!(flip_noise >= 0.0 && flip_noise <= 1.0)) throw ConfigError("oracle flip noise must lie in [0, 1]");
  if (training_rolls.size() == 0) throw ConfigError("oracle needs at least one training roll");
}

std::string OracleGenerator::describe() const {
  std::ostringstream os;
  os << "oracle-generator(p=" << memorization_rate << ",sigma=" << flip_noise
     << ",population_seed=" << population_seed << ")";
  return os.str();
}

Pianoroll oracle_generate(const OracleGenerator& oracle, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x0AC1E));
  if (uniform01(rng) < oracle.memorization_rate) {
    Pianoroll roll = oracle.training_rolls.rolls[uniform_index(rng, oracle.training_rolls.size())];
    if (oracle.flip_noise > 0.0) {
      const std::size_t n = roll.shape().cells();
      for (std::size_t i = 0; i < n; ++i)
        if (uniform01(rng) < oracle.flip_noise) roll.set_flat(i, !roll.get_flat(i));
    }
    return roll;
  }
  return synth_roll(derive_seed(oracle.population_seed, seed), oracle.training_rolls.shape,
                    oracle.population_style);
}

void OracleDiscriminator::validate() const {
  if (!std::isfinite(margin) || margin < 0.0) throw ConfigError("oracle margin must be finite and >= 0");
  if (!std::isfinite(score_noise) || score_noise < 0.0)
    throw ConfigError("oracle score noise must be finite and >= 0");
}

std::string OracleDiscriminator::describe() const {
  std::ostringstream os;
  os << "oracle-discriminator(margin=" << margin << ",tau=" << score_noise << ")";
  return os.str();
}

double oracle_d_score(const OracleDiscriminator& oracle, std::uint64_t id, std::uint64_t seed) {
  const double signal = oracle.member_ids.contains(id) ? oracle.margin : 0.0;
  if (oracle.score_noise == 0.0) return signal;
  Rng rng(derive_seed(seed, id));
  return signal + std::normal_distribution<double>(0.0, oracle.score_noise)(rng);
}

}  // namespace mia
