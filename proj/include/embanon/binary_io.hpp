// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace embanon {

/// CRC-64/XZ (ECMA-182 polynomial, reflected, init and xorout all ones).
/// Check value for "123456789" is 0x995DC9BBDF1939FA.
std::uint64_t crc64(std::span<const std::uint8_t> bytes) noexcept;

std::string hex64(std::uint64_t v);

/// Content digest of a sealed buffer: the CRC of everything before the trailer.
std::string sealed_digest(std::span<const std::uint8_t> sealed);

/// Little-endian append-only encoder.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void raw(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }
  void text(std::string_view s);

  /// Appends CRC-64 of everything written so far.
  void seal() { u64(crc64(bytes_)); }

  const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
  std::vector<std::uint8_t> take() noexcept { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Little-endian cursor over a byte buffer. Any read past the end throws
/// CorruptionError naming `context`.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string context)
      : bytes_(bytes), context_(std::move(context)) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  std::span<const std::uint8_t> raw(std::size_t n);
  std::string text(std::size_t n);

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> bytes_;
  std::string context_;
  std::size_t pos_ = 0;
};

/// Verifies and strips the trailing CRC-64. Throws CorruptionError on mismatch
/// or when the buffer is shorter than the checksum itself.
std::span<const std::uint8_t> verify_sealed(std::span<const std::uint8_t> bytes,
                                            const std::string& context);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace embanon
