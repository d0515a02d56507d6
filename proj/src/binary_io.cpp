// SPDX-License-Identifier: Apache-2.0
#include "embanon/binary_io.hpp"

#include <bit>
#include <boost/crc.hpp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "embanon/errors.hpp"

namespace embanon {

std::uint64_t crc64(std::span<const std::uint8_t> bytes) noexcept {
  boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, 0xFFFFFFFFFFFFFFFFULL, 0xFFFFFFFFFFFFFFFFULL,
                     true, true>
      crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string sealed_digest(std::span<const std::uint8_t> sealed) {
  if (sealed.size() < 8) throw CorruptionError("sealed buffer shorter than its checksum");
  return hex64(crc64(sealed.first(sealed.size() - 8)));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::text(std::string_view s) {
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteReader::need(std::size_t n) const {
  if (n > remaining()) {
    throw CorruptionError(context_ + ": truncated at byte " + std::to_string(pos_) + " (needed " +
                          std::to_string(n) + ", " + std::to_string(remaining()) + " left)");
  }
}

std::uint8_t ByteReader::u8() {
  need(1);
  return bytes_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
  need(n);
  auto out = bytes_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::string ByteReader::text(std::size_t n) {
  auto r = raw(n);
  return std::string(r.begin(), r.end());
}

std::span<const std::uint8_t> verify_sealed(std::span<const std::uint8_t> bytes,
                                            const std::string& context) {
  if (bytes.size() < 8) throw CorruptionError(context + ": shorter than its checksum");
  const auto body = bytes.first(bytes.size() - 8);
  ByteReader tail(bytes.last(8), context);
  const std::uint64_t stored = tail.u64();
  const std::uint64_t actual = crc64(body);
  if (stored != actual) {
    throw CorruptionError(context + ": checksum mismatch (stored " + hex64(stored) + ", computed " +
                          hex64(actual) + ")");
  }
  return body;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

}  // namespace embanon
