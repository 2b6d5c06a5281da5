#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mia {

// Little-endian byte buffer builder used by the dataset and checkpoint writers.
class ByteWriter {
 public:
  void put_bytes(std::span<const std::uint8_t> bytes) {
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
  }
  void put_tag(std::string_view tag) {
    buf_.insert(buf_.end(), tag.begin(), tag.end());
  }
  void put_u32(std::uint32_t v) { put_le(v, 4); }
  void put_i32(std::int32_t v) { put_le(static_cast<std::uint32_t>(v), 4); }
  void put_u64(std::uint64_t v) { put_le(v, 8); }
  void put_f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u32(bits);
  }

  const std::vector<std::uint8_t>& bytes() const { return buf_; }

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

// Bounds-checked little-endian reader. Running off the end throws FormatError
// with the message supplied at construction ("truncated dataset", ...).
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string truncated_message)
      : data_(data), truncated_(std::move(truncated_message)) {}

  std::span<const std::uint8_t> take(std::size_t n);
  std::string take_string(std::size_t n);
  std::uint32_t u32();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::uint64_t u64();
  float f32();

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string truncated_;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace mia
