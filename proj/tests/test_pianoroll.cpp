#include <filesystem>
#include <numeric>
#include <set>

#include "doctest.h"
#include "mia/binary_io.hpp"
#include "mia/error.hpp"
#include "mia/pianoroll.hpp"
#include "mia/rng.hpp"

using namespace mia;
namespace fs = std::filesystem;

namespace {

PianorollShape small_shape() { return {2, 1, 16, 24, 24}; }

fs::path temp_file(const std::string& name) {
  auto dir = fs::temp_directory_path() / "mia_unit";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("shape validation") {
  CHECK_NOTHROW(small_shape().validate());
  CHECK_THROWS_AS((PianorollShape{0, 1, 1, 12, 24}.validate()), ConfigError);
  CHECK_THROWS_AS((PianorollShape{4096, 64, 64, 128, 24}.validate()), ConfigError);
  CHECK(small_shape().cells() == 768);
}

TEST_CASE("synth_generate is deterministic and binary") {
  const auto a = synth_generate(7, 10, small_shape());
  const auto b = synth_generate(7, 10, small_shape());
  CHECK(a == b);
  REQUIRE(a.size() == 10);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.ids[i] == i);
    for (auto c : a.rolls[i].cells()) CHECK((c == 0 || c == 1));
  }
}

TEST_CASE("different seeds give different datasets") {
  const auto a = synth_generate(7, 100, small_shape());
  const auto b = synth_generate(8, 100, small_shape());
  std::size_t differing = 0;
  for (std::size_t i = 0; i < 100; ++i) differing += a.rolls[i] != b.rolls[i];
  CHECK(differing >= 1);
}

TEST_CASE("synthetic rolls carry chords and rhythm") {
  StyleParams clean;
  clean.note_dropout = 0.0;
  const auto ds = synth_generate(3, 50, small_shape(), clean);
  std::set<std::vector<std::uint8_t>> distinct;
  for (const auto& r : ds.rolls) {
    distinct.insert({r.cells().begin(), r.cells().end()});
    // Every step on track 0 holds a triad.
    for (std::uint32_t s = 0; s < 16; ++s) {
      auto pcp = pitch_class_profile(r, 0, 0, s);
      CHECK(std::accumulate(pcp.begin(), pcp.end(), 0.0) == 3.0);
    }
    // Track 1 has a periodic single-note rhythm.
    std::size_t onsets = 0;
    for (std::uint32_t s = 0; s < 16; ++s) {
      auto pcp = pitch_class_profile(r, 1, 0, s);
      onsets += static_cast<std::size_t>(std::accumulate(pcp.begin(), pcp.end(), 0.0));
    }
    CHECK(onsets >= 2);
    CHECK(onsets <= 8);
  }
  CHECK(distinct.size() > 10);
}

TEST_CASE("extra tracks copy track 0 transposed") {
  StyleParams clean;
  clean.note_dropout = 0.0;
  const PianorollShape shape{3, 1, 8, 36, 24};
  const auto r = synth_roll(11, shape, clean);
  for (std::uint32_t s = 0; s < 8; ++s) CHECK(pitch_class_profile(r, 0, 0, s) == pitch_class_profile(r, 2, 0, s));
}

TEST_CASE("pitch range too small") {
  CHECK_THROWS_WITH_AS(synth_generate(1, 1, PianorollShape{2, 1, 4, 11, 24}),
                       "pitch range too small for pitch classes", ConfigError);
}

TEST_CASE("split sizes follow the floor rule") {
  const auto ds = synth_generate(1, 100, small_shape());
  auto parts = split(ds, {0.5, 9});
  CHECK(parts.train.size() == 50);
  CHECK(parts.test.size() == 50);
  CHECK(split_train_size(21425, 0.1) == 2142);
  CHECK(21425 - split_train_size(21425, 0.1) == 19283);
}

TEST_CASE("split is a seeded partition preserving ids") {
  const auto ds = synth_generate(2, 37, small_shape());
  for (double f : {0.1, 0.3, 0.5, 0.77, 0.95}) {
    for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
      const auto parts = split(ds, {f, seed});
      const auto again = split(ds, {f, seed});
      CHECK(parts.train == again.train);
      CHECK(parts.train.size() == split_train_size(37, f));
      CHECK(parts.train.size() + parts.test.size() == 37);
      std::set<std::uint64_t> all;
      for (std::size_t i = 0; i < parts.train.size(); ++i) {
        all.insert(parts.train.ids[i]);
        CHECK(parts.train.rolls[i] == ds.rolls[parts.train.ids[i]]);
      }
      for (std::size_t i = 0; i < parts.test.size(); ++i) {
        CHECK(all.insert(parts.test.ids[i]).second);
        CHECK(parts.test.rolls[i] == ds.rolls[parts.test.ids[i]]);
      }
      CHECK(all.size() == 37);
    }
  }
}

TEST_CASE("degenerate splits are rejected") {
  const auto ds = synth_generate(2, 5, small_shape());
  CHECK_THROWS_WITH(split(ds, {0.1, 0}), "degenerate split");
  CHECK_THROWS_WITH(split(synth_generate(2, 1, small_shape()), {0.5, 0}), "degenerate split");
  CHECK_THROWS_AS(split(ds, {1.0, 0}), ConfigError);
}

TEST_CASE("flatten layout and round trip") {
  const PianorollShape shape{2, 1, 4, 3, 24};
  Pianoroll zero(shape);
  const auto v = flatten(zero);
  CHECK(v.size() == 24);
  CHECK(std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }));

  Pianoroll one(shape);
  one.set(0, 0, 0, 0);
  CHECK(flatten(one)[0] == 1.0);
  one.set(1, 0, 2, 1);
  CHECK(flatten(one)[((1 * 1 + 0) * 4 + 2) * 3 + 1] == 1.0);

  // Bijection on random rolls.
  Rng rng(5);
  for (int k = 0; k < 20; ++k) {
    Pianoroll r(shape);
    for (std::size_t i = 0; i < shape.cells(); ++i) r.set_flat(i, uniform01(rng) < 0.3);
    CHECK(reshape(flatten(r), shape) == r);
  }
}

TEST_CASE("pitch class profile") {
  const PianorollShape shape{1, 1, 2, 48, 24};
  Pianoroll r(shape);
  auto empty = pitch_class_profile(r, 0, 0, 0);
  CHECK(std::all_of(empty.begin(), empty.end(), [](double x) { return x == 0.0; }));

  r.set(0, 0, 0, 0);  // MIDI 24 = C
  auto c = pitch_class_profile(r, 0, 0, 0);
  CHECK(c[0] == 1.0);
  CHECK(std::accumulate(c.begin(), c.end(), 0.0) == 1.0);

  // MIDI 60, 64, 67 -> pitch rows 36, 40, 43.
  r.set(0, 0, 1, 36);
  r.set(0, 0, 1, 40);
  r.set(0, 0, 1, 43);
  auto triad = pitch_class_profile(r, 0, 0, 1);
  for (int k = 0; k < 12; ++k) CHECK(triad[k] == ((k == 0 || k == 4 || k == 7) ? 1.0 : 0.0));

  CHECK_THROWS_AS(pitch_class_profile(r, 1, 0, 0), ConfigError);
  CHECK_THROWS_AS(pitch_class_profile(r, 0, 0, 2), ConfigError);
}

TEST_CASE("profile sums to active cells of the step") {
  const auto ds = synth_generate(4, 20, {2, 2, 8, 30, 21});
  for (const auto& r : ds.rolls)
    for (std::uint32_t t = 0; t < 2; ++t)
      for (std::uint32_t b = 0; b < 2; ++b)
        for (std::uint32_t s = 0; s < 8; ++s) {
          auto p = pitch_class_profile(r, t, b, s);
          double active = 0;
          for (std::uint32_t q = 0; q < 30; ++q) active += r.get(t, b, s, q);
          CHECK(std::accumulate(p.begin(), p.end(), 0.0) == active);
        }
}

TEST_CASE("bit packing is MSB first") {
  const std::vector<std::uint8_t> cells{1, 0, 0, 0, 0, 0, 0, 1, 1};
  const auto packed = pack_bits(cells);
  REQUIRE(packed.size() == 2);
  CHECK(packed[0] == 0x81);
  CHECK(packed[1] == 0x80);
  CHECK(unpack_bits(packed, cells.size()) == cells);
}

TEST_CASE("dataset header layout") {
  const auto ds = synth_generate(1, 2, {1, 1, 1, 12, -3});
  const auto bytes = encode_dataset(ds);
  REQUIRE(bytes.size() == 32 + 2 * 2);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "PRD1");
  CHECK(bytes[4] == 1);
  CHECK(bytes[8] == 2);
  CHECK(bytes[12] == 1);
  CHECK(bytes[24] == 12);
  CHECK(bytes[28] == 0xFD);  // -3 as little-endian i32
  CHECK(bytes[31] == 0xFF);
}

TEST_CASE("dataset file round trip with ids") {
  const auto ds = synth_generate(5, 30, small_shape());
  const auto parts = split(ds, {0.5, 3});
  const auto path = temp_file("roundtrip.prd");
  write_dataset(parts.test, path);
  CHECK(fs::exists(sidecar_path(path)));
  CHECK(read_dataset(path) == parts.test);

  // Without the sidecar, ids fall back to 0..n-1.
  fs::remove(sidecar_path(path));
  const auto bare = read_dataset(path);
  CHECK(bare.rolls == parts.test.rolls);
  CHECK(bare.ids[0] == 0);
}

TEST_CASE("dataset parse errors are distinct") {
  const auto ds = synth_generate(5, 3, small_shape());
  auto bytes = encode_dataset(ds);

  auto bad_magic = bytes;
  std::copy_n("XXXX", 4, bad_magic.begin());
  CHECK_THROWS_WITH_AS(decode_dataset(bad_magic), "bad magic", FormatError);

  auto bad_version = bytes;
  bad_version[4] = 2;
  CHECK_THROWS_WITH_AS(decode_dataset(bad_version), "unsupported version", FormatError);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 1);
  CHECK_THROWS_WITH_AS(decode_dataset(truncated), "truncated dataset", FormatError);
  CHECK_THROWS_WITH_AS(decode_dataset(std::span(bytes).first(10)), "truncated dataset", FormatError);

  auto empty = bytes;
  empty.resize(32);
  empty[8] = 0;
  CHECK_THROWS_WITH_AS(decode_dataset(empty), "empty dataset", FormatError);
}
