#include "mia/pianoroll.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

#include "mia/binary_io.hpp"
#include "mia/error.hpp"
#include "mia/rng.hpp"

namespace mia {

namespace {

constexpr std::string_view kDatasetMagic = "PRD1";

int mod12(int x) { return ((x % 12) + 12) % 12; }

// Folds a pitch index into [0, pitches) by octaves. Requires pitches >= 12.
std::uint32_t fold_octave(int p, std::uint32_t pitches) {
  while (p >= static_cast<int>(pitches)) p -= 12;
  while (p < 0) p += 12;
  return static_cast<std::uint32_t>(p);
}

struct Chord {
  int root_pc;
  bool minor;
};

}  // namespace

void PianorollShape::validate() const {
  if (tracks == 0 || bars == 0 || steps_per_bar == 0 || pitches == 0)
    throw ConfigError("pianoroll shape counts must be >= 1");
  // Compare stepwise so the product cannot overflow.
  std::size_t total = 1;
  for (std::size_t d : {std::size_t{tracks}, std::size_t{bars}, std::size_t{steps_per_bar},
                        std::size_t{pitches}}) {
    total *= d;
    if (total > kMaxCells) throw ConfigError("pianoroll shape exceeds 2^24 cells");
  }
}

Pianoroll::Pianoroll(PianorollShape shape) : shape_(shape) {
  shape_.validate();
  cells_.assign(shape_.cells(), 0);
}

Pianoroll::Pianoroll(PianorollShape shape, std::vector<std::uint8_t> cells)
    : shape_(shape), cells_(std::move(cells)) {
  shape_.validate();
  if (cells_.size() != shape_.cells()) throw FormatError("cell count does not match shape");
  for (auto c : cells_)
    if (c > 1) throw FormatError("pianoroll cells must be binary");
}

std::size_t Pianoroll::index(std::uint32_t track, std::uint32_t bar, std::uint32_t step,
                             std::uint32_t pitch) const {
  if (track >= shape_.tracks || bar >= shape_.bars || step >= shape_.steps_per_bar ||
      pitch >= shape_.pitches)
    throw ConfigError("pianoroll index out of range");
  return ((std::size_t{track} * shape_.bars + bar) * shape_.steps_per_bar + step) *
             shape_.pitches +
         pitch;
}

std::size_t Pianoroll::active_count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

void Dataset::validate() const {
  shape.validate();
  if (ids.size() != rolls.size()) throw FormatError("dataset id count does not match roll count");
  for (const auto& r : rolls)
    if (r.shape() != shape) throw FormatError("dataset rolls do not share one shape");
  std::unordered_set<std::uint64_t> seen(ids.begin(), ids.end());
  if (seen.size() != ids.size()) throw FormatError("dataset ids are not unique");
}

Pianoroll synth_roll(std::uint64_t seed, const PianorollShape& shape, const StyleParams& style) {
  shape.validate();
  if (shape.pitches < 12) throw ConfigError("pitch range too small for pitch classes");
  if (style.note_dropout < 0.0 || style.note_dropout >= 1.0)
    throw ConfigError("note_dropout must be in [0, 1)");

  Rng rng(seed);
  Pianoroll roll(shape);

  // I followed by one of IV, V, vi.
  const int key = static_cast<int>(uniform_index(rng, 12));
  static constexpr std::array<Chord, 3> kSecond{{{5, false}, {7, false}, {9, true}}};
  const Chord second = kSecond[uniform_index(rng, kSecond.size())];
  const std::array<Chord, 2> progression{{{key, false}, {mod12(key + second.root_pc), second.minor}}};

  const std::uint32_t octaves = shape.pitches / 12;
  const int octave = static_cast<int>(uniform_index(rng, octaves));

  const std::size_t total_steps = std::size_t{shape.bars} * shape.steps_per_bar;
  std::vector<std::uint32_t> periods;
  for (auto p : style.rhythm_periods)
    if (p >= 1 && p <= total_steps) periods.push_back(p);
  const std::uint32_t period = periods.empty() ? 1 : periods[uniform_index(rng, periods.size())];
  const std::uint32_t phase = static_cast<std::uint32_t>(uniform_index(rng, period));

  auto chord_at = [&](std::uint32_t bar, std::uint32_t step) -> const Chord& {
    if (shape.steps_per_bar == 1) return progression[bar % 2];
    return progression[step < shape.steps_per_bar / 2 ? 0 : 1];
  };
  auto lowest_index = [&](int pc) { return mod12(pc - shape.base_midi_pitch); };

  for (std::uint32_t bar = 0; bar < shape.bars; ++bar) {
    for (std::uint32_t step = 0; step < shape.steps_per_bar; ++step) {
      const Chord& chord = chord_at(bar, step);
      const int root = lowest_index(chord.root_pc) + 12 * octave;
      const std::array<int, 3> intervals{0, chord.minor ? 3 : 4, 7};
      for (int iv : intervals) {
        const std::uint32_t p = fold_octave(root + iv, shape.pitches);
        roll.set(0, bar, step, p);
        for (std::uint32_t t = 2; t < shape.tracks; ++t) {
          const int shifted = static_cast<int>(p) + style.upper_track_transpose * static_cast<int>(t - 1);
          roll.set(t, bar, step, fold_octave(shifted, shape.pitches));
        }
      }
      if (shape.tracks >= 2) {
        const std::size_t global = std::size_t{bar} * shape.steps_per_bar + step;
        if (global % period == phase)
          roll.set(1, bar, step, static_cast<std::uint32_t>(lowest_index(chord.root_pc)));
      }
    }
  }

  if (style.note_dropout > 0.0) {
    for (std::size_t i = 0; i < shape.cells(); ++i)
      if (roll.get_flat(i) && uniform01(rng) < style.note_dropout) roll.set_flat(i, false);
  }
  return roll;
}

Dataset synth_generate(std::uint64_t seed, std::size_t count, const PianorollShape& shape,
                       const StyleParams& style) {
  if (count == 0) throw ConfigError("synthetic dataset count must be >= 1");
  Dataset ds;
  ds.shape = shape;
  ds.rolls.reserve(count);
  ds.ids.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    ds.rolls.push_back(synth_roll(derive_seed(seed, i), shape, style));
    ds.ids.push_back(i);
  }
  return ds;
}

std::size_t split_train_size(std::size_t n, double train_fraction) {
  return static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
}

SplitResult split(const Dataset& dataset, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
    throw ConfigError("train_fraction must lie in (0, 1)");
  const std::size_t n = dataset.size();
  if (n < 2) throw ConfigError("degenerate split");
  const std::size_t n_train = split_train_size(n, spec.train_fraction);
  if (n_train == 0 || n_train == n) throw ConfigError("degenerate split");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(spec.seed, 0));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<bool> in_train(n, false);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = true;

  SplitResult out;
  out.train.shape = out.test.shape = dataset.shape;
  for (std::size_t i = 0; i < n; ++i) {
    Dataset& dst = in_train[i] ? out.train : out.test;
    dst.rolls.push_back(dataset.rolls[i]);
    dst.ids.push_back(dataset.ids[i]);
  }
  return out;
}

std::vector<double> flatten(const Pianoroll& roll) {
  auto cells = roll.cells();
  return std::vector<double>(cells.begin(), cells.end());
}

Pianoroll reshape(std::span<const double> flat, const PianorollShape& shape) {
  if (flat.size() != shape.cells()) throw FormatError("flat vector length does not match shape");
  std::vector<std::uint8_t> cells(flat.size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (flat[i] != 0.0 && flat[i] != 1.0) throw FormatError("flat vector is not binary");
    cells[i] = flat[i] == 1.0 ? 1 : 0;
  }
  return Pianoroll(shape, std::move(cells));
}

std::array<double, 12> pitch_class_profile(const Pianoroll& roll, std::uint32_t track,
                                           std::uint32_t bar, std::uint32_t step) {
  const auto& s = roll.shape();
  const std::size_t base = roll.index(track, bar, step, 0);
  std::array<double, 12> profile{};
  auto cells = roll.cells();
  for (std::uint32_t p = 0; p < s.pitches; ++p)
    if (cells[base + p]) profile[mod12(s.base_midi_pitch + static_cast<int>(p))] += 1.0;
  return profile;
}

std::vector<std::uint8_t> pack_bits(std::span<const std::uint8_t> cells) {
  std::vector<std::uint8_t> packed((cells.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < cells.size(); ++i)
    if (cells[i]) packed[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  return packed;
}

std::vector<std::uint8_t> unpack_bits(std::span<const std::uint8_t> packed, std::size_t cells) {
  std::vector<std::uint8_t> out(cells);
  for (std::size_t i = 0; i < cells; ++i) out[i] = (packed[i / 8] >> (7 - i % 8)) & 1u;
  return out;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& dataset) {
  dataset.validate();
  if (dataset.size() == 0) throw FormatError("empty dataset");
  ByteWriter w;
  w.put_tag(kDatasetMagic);
  w.put_u32(kDatasetFormatVersion);
  w.put_u32(static_cast<std::uint32_t>(dataset.size()));
  w.put_u32(dataset.shape.tracks);
  w.put_u32(dataset.shape.bars);
  w.put_u32(dataset.shape.steps_per_bar);
  w.put_u32(dataset.shape.pitches);
  w.put_i32(dataset.shape.base_midi_pitch);
  for (const auto& r : dataset.rolls) w.put_bytes(pack_bits(r.cells()));
  return w.bytes();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "truncated dataset");
  if (r.take_string(4) != kDatasetMagic) throw FormatError("bad magic");
  if (r.u32() != kDatasetFormatVersion) throw FormatError("unsupported version");
  const std::uint32_t count = r.u32();
  Dataset ds;
  ds.shape.tracks = r.u32();
  ds.shape.bars = r.u32();
  ds.shape.steps_per_bar = r.u32();
  ds.shape.pitches = r.u32();
  ds.shape.base_midi_pitch = r.i32();
  if (count == 0) throw FormatError("empty dataset");
  try {
    ds.shape.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid shape: ") + e.what());
  }
  const std::size_t cells = ds.shape.cells();
  const std::size_t per_roll = (cells + 7) / 8;
  if (r.remaining() / per_roll < count) throw FormatError("truncated dataset");
  ds.rolls.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    ds.rolls.emplace_back(ds.shape, unpack_bits(r.take(per_roll), cells));
    ds.ids.push_back(i);
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after dataset");
  return ds;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto side = path;
  side.replace_extension(".meta.json");
  return side;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path,
                   const StyleParams* style) {
  write_file_bytes(path, encode_dataset(dataset));
  nlohmann::json meta;
  meta["ids"] = dataset.ids;
  meta["style"] = style ? to_json(*style) : nlohmann::json(nullptr);
  write_text_file(sidecar_path(path), meta.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& path) {
  Dataset ds = decode_dataset(read_file_bytes(path));
  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(read_text_file(side));
      ds.ids = meta.at("ids").get<std::vector<std::uint64_t>>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("bad dataset sidecar " + side.string() + ": " + e.what());
    }
    if (ds.ids.size() != ds.rolls.size()) throw FormatError("sidecar id count mismatch");
    ds.validate();
  }
  return ds;
}

nlohmann::json to_json(const PianorollShape& s) {
  return {{"tracks", s.tracks},   {"bars", s.bars},
          {"steps_per_bar", s.steps_per_bar}, {"pitches", s.pitches},
          {"base_midi_pitch", s.base_midi_pitch}};
}

PianorollShape shape_from_json(const nlohmann::json& j) {
  PianorollShape s;
  s.tracks = j.value("tracks", s.tracks);
  s.bars = j.value("bars", s.bars);
  s.steps_per_bar = j.value("steps_per_bar", s.steps_per_bar);
  s.pitches = j.value("pitches", s.pitches);
  s.base_midi_pitch = j.value("base_midi_pitch", s.base_midi_pitch);
  return s;
}

nlohmann::json to_json(const StyleParams& style) {
  return {{"rhythm_periods", style.rhythm_periods},
          {"note_dropout", style.note_dropout},
          {"upper_track_transpose", style.upper_track_transpose}};
}

StyleParams style_from_json(const nlohmann::json& j) {
  StyleParams s;
  if (j.is_null()) return s;
  s.rhythm_periods = j.value("rhythm_periods", s.rhythm_periods);
  s.note_dropout = j.value("note_dropout", s.note_dropout);
  s.upper_track_transpose = j.value("upper_track_transpose", s.upper_track_transpose);
  return s;
}

}  // namespace mia
