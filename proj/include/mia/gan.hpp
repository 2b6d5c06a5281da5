#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "mia/error.hpp"
#include "mia/nn.hpp"
#include "mia/pianoroll.hpp"

namespace mia {

/// Layer sizes of the Composer-style network; the descriptor written into checkpoints.
struct GanArchitecture {
  PianorollShape shape;
  std::size_t latent_dim = 32;
  std::size_t trunk_hidden = 128;
  std::vector<std::size_t> discriminator_hidden{64};

  std::vector<std::size_t> trunk_dims() const { return {latent_dim, trunk_hidden}; }
  std::vector<std::size_t> head_dims() const { return {trunk_hidden, shape.cells_per_track()}; }
  std::vector<std::size_t> discriminator_dims() const;

  nlohmann::json to_json() const;
  static GanArchitecture from_json(const nlohmann::json& j);
  bool operator==(const GanArchitecture&) const = default;
};

/// Shared latent trunk, one generator head per track, one discriminator.
struct ComposerGan {
  GanArchitecture arch;
  nn::Mlp trunk;
  std::vector<nn::Mlp> heads;
  nn::Mlp discriminator;

  static ComposerGan create(const GanArchitecture& arch, std::uint64_t init_seed);
  /// All-zero weights with the architecture's layer layout.
  static ComposerGan zeros(const GanArchitecture& arch);
  void validate() const;
};

/// Concatenated per-track head logits, ordered like the flattened roll.
std::vector<double> generator_logits(const ComposerGan& gan, std::span<const double> z);
/// Cells are 1 exactly where the corresponding logit is > 0.
Pianoroll g_sample(const ComposerGan& gan, std::span<const double> z);
std::vector<double> sample_latent(std::size_t latent_dim, Rng& rng);
/// Raw discriminator logit; larger means "looks like training data".
double d_score(const ComposerGan& gan, const Pianoroll& roll);

struct TrainConfig {
  std::size_t iterations = 2000;
  std::size_t batch_size = 32;
  std::size_t latent_dim = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 200;
  std::size_t d_steps_per_g_step = 1;
  std::size_t trunk_hidden = 128;
  std::vector<std::size_t> discriminator_hidden{64};

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
  bool operator==(const Tensor&) const = default;
};

struct Checkpoint {
  std::uint64_t iteration = 0;
  GanArchitecture arch;
  std::vector<Tensor> tensors;

  bool operator==(const Checkpoint&) const = default;
};

Checkpoint make_checkpoint(const ComposerGan& gan, std::uint64_t iteration);
/// Builds a model with the checkpoint's own architecture.
ComposerGan gan_from_checkpoint(const Checkpoint& ckpt);
/// Loads weights into an existing model; throws FormatError("architecture mismatch")
/// when the descriptors or tensor layouts differ.
void load_into(ComposerGan& gan, const Checkpoint& ckpt);

// Checkpoint file (GANC): "GANC" | u32 version=1 | u64 iteration | u32 len | UTF-8 JSON
// descriptor | u32 tensor count | per tensor: u32 rank, u32 dims[rank], f32 data (LE).
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

using CheckpointSink = std::function<void(const Checkpoint&)>;

/// Raised on a non-finite loss or gradient; carries the newest checkpoint emitted before it.
class TrainingDivergence : public DivergenceError {
 public:
  TrainingDivergence(const std::string& what, std::optional<Checkpoint> last_good)
      : DivergenceError(what), last_good_(std::move(last_good)) {}
  const std::optional<Checkpoint>& last_good() const { return last_good_; }

 private:
  std::optional<Checkpoint> last_good_;
};

struct TrainStats {
  std::size_t iteration = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;
};

/// Alternating non-saturating BCE updates (D: real->1, fake->0; G: fake->1), sequential
/// and fully determined by config.seed. Emits a checkpoint every checkpoint_every iterations.
std::vector<Checkpoint> train(const Dataset& train_set, const TrainConfig& config,
                              const CheckpointSink& sink = {},
                              const std::function<void(const TrainStats&)>& on_stats = {});

/// Iterations at which `train` emits checkpoints.
std::vector<std::size_t> checkpoint_schedule(std::size_t iterations, std::size_t every);

}  // namespace mia
