#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"

namespace mia {

// Upper bound on cells per roll; keeps everything desk-scale.
inline constexpr std::size_t kMaxCells = std::size_t{1} << 24;

struct PianorollShape {
  std::uint32_t tracks = 2;
  std::uint32_t bars = 1;
  std::uint32_t steps_per_bar = 16;
  std::uint32_t pitches = 24;
  std::int32_t base_midi_pitch = 24;

  std::size_t cells() const {
    return std::size_t{tracks} * bars * steps_per_bar * pitches;
  }
  std::size_t cells_per_track() const { return std::size_t{bars} * steps_per_bar * pitches; }
  std::size_t steps_total() const { return std::size_t{tracks} * bars * steps_per_bar; }

  /// Throws ConfigError when a count is zero or the cell bound is exceeded.
  void validate() const;

  bool operator==(const PianorollShape&) const = default;
};

/// Binary multi-track pianoroll, cells stored row-major over (track, bar, step, pitch).
class Pianoroll {
 public:
  Pianoroll() = default;
  explicit Pianoroll(PianorollShape shape);
  /// Takes ownership of `cells`; every entry must be 0 or 1.
  Pianoroll(PianorollShape shape, std::vector<std::uint8_t> cells);

  const PianorollShape& shape() const { return shape_; }
  std::span<const std::uint8_t> cells() const { return cells_; }

  std::size_t index(std::uint32_t track, std::uint32_t bar, std::uint32_t step,
                    std::uint32_t pitch) const;
  bool get(std::uint32_t track, std::uint32_t bar, std::uint32_t step, std::uint32_t pitch) const {
    return cells_[index(track, bar, step, pitch)] != 0;
  }
  void set(std::uint32_t track, std::uint32_t bar, std::uint32_t step, std::uint32_t pitch,
           bool on = true) {
    cells_[index(track, bar, step, pitch)] = on ? 1 : 0;
  }
  void set_flat(std::size_t i, bool on) { cells_.at(i) = on ? 1 : 0; }
  bool get_flat(std::size_t i) const { return cells_.at(i) != 0; }

  std::size_t active_count() const;

  bool operator==(const Pianoroll&) const = default;

 private:
  PianorollShape shape_{};
  std::vector<std::uint8_t> cells_;
};

/// Knobs of the synthetic tonal generator. Defaults give a few thousand
/// distinct chord/rhythm skeletons plus per-cell dropout.
struct StyleParams {
  std::vector<std::uint32_t> rhythm_periods{2, 4, 8};
  double note_dropout = 0.1;
  std::int32_t upper_track_transpose = 12;

  bool operator==(const StyleParams&) const = default;
};

struct Dataset {
  PianorollShape shape;
  std::vector<Pianoroll> rolls;
  std::vector<std::uint64_t> ids;

  std::size_t size() const { return rolls.size(); }
  /// Checks shape agreement, id count and id uniqueness.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

struct SplitSpec {
  double train_fraction = 0.5;
  std::uint64_t seed = 0;
};

struct SplitResult {
  Dataset train;
  Dataset test;
};

/// One synthetic roll; `synth_generate` uses it with per-index derived seeds.
Pianoroll synth_roll(std::uint64_t seed, const PianorollShape& shape, const StyleParams& style);

Dataset synth_generate(std::uint64_t seed, std::size_t count, const PianorollShape& shape,
                       const StyleParams& style = {});

/// Seeded uniform partition; train gets floor(fraction * n) rolls, test the remainder.
/// Both halves keep the input's relative order and ids.
SplitResult split(const Dataset& dataset, const SplitSpec& spec);

std::size_t split_train_size(std::size_t n, double train_fraction);

std::vector<double> flatten(const Pianoroll& roll);
Pianoroll reshape(std::span<const double> flat, const PianorollShape& shape);

std::array<double, 12> pitch_class_profile(const Pianoroll& roll, std::uint32_t track,
                                           std::uint32_t bar, std::uint32_t step);

// On-disk format (PRD1), little-endian:
//   "PRD1" | u32 version=1 | u32 count | u32 tracks | u32 bars | u32 steps_per_bar
//   | u32 pitches | i32 base_midi_pitch | count x ceil(cells/8) bytes, MSB-first.
// A sidecar <path>.meta.json carries {"ids": [...], "style": {...}}.
inline constexpr std::uint32_t kDatasetFormatVersion = 1;

std::vector<std::uint8_t> encode_dataset(const Dataset& dataset);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> cells);
std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> packed, std::size_t cells);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

void write_dataset(const Dataset& dataset, const std::filesystem::path& path,
                   const StyleParams* style = nullptr);
/// Reads the binary file and, when present, the sidecar ids.
Dataset read_dataset(const std::filesystem::path& path);

nlohmann::json to_json(const PianorollShape& shape);
PianorollShape shape_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StyleParams& style);
StyleParams style_from_json(const nlohmann::json& j);

}  // namespace mia
