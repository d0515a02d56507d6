// SPDX-License-Identifier: Apache-2.0
#include "embanon/layer_file.hpp"

#include <cstring>

#include "embanon/binary_io.hpp"
#include "embanon/errors.hpp"

namespace embanon {

std::array<char, 8> make_magic(const char (&text)[9]) {
  std::array<char, 8> m{};
  std::memcpy(m.data(), text, 8);
  return m;
}

std::size_t layer_container_size(std::span<const DenseLayer> layers, std::size_t metadata_bytes) {
  std::size_t n = 8 + 4 * 5;
  for (const auto& l : layers) n += 4 + 4 + 1 + 4 * (l.weights.size() + l.bias.size());
  return n + 4 + metadata_bytes + 8;
}

std::vector<std::uint8_t> serialize_layers(const LayerContainer& c) {
  ByteWriter w;
  w.raw({reinterpret_cast<const std::uint8_t*>(c.magic.data()), 8});
  w.u32(kLayerContainerVersion);
  w.u32(c.input_dim);
  w.u32(c.num_classes);
  w.u32(c.output_dim);
  w.u32(static_cast<std::uint32_t>(c.layers.size()));
  for (const auto& l : c.layers) {
    l.validate();
    w.u32(static_cast<std::uint32_t>(l.weights.rows()));
    w.u32(static_cast<std::uint32_t>(l.weights.cols()));
    w.u8(static_cast<std::uint8_t>(l.activation));
    for (const float v : l.weights.values()) w.f32(v);
    for (const float v : l.bias) w.f32(v);
  }
  const std::string blob = c.metadata.dump();
  w.u32(static_cast<std::uint32_t>(blob.size()));
  w.text(blob);
  w.seal();
  return w.take();
}

LayerContainer deserialize_layers(std::span<const std::uint8_t> bytes,
                                  const std::array<char, 8>& expected_magic) {
  const std::string name(expected_magic.begin(), expected_magic.end());
  const std::string ctx = name + " file";
  if (bytes.size() < 8 || std::memcmp(bytes.data(), expected_magic.data(), 8) != 0) {
    throw FormatError(ctx + ": bad magic (expected " + name + ")");
  }
  {
    ByteReader probe(bytes, ctx);
    probe.raw(8);
    const std::uint32_t version = probe.u32();
    if (version != kLayerContainerVersion) {
      throw FormatError(ctx + ": unsupported version " + std::to_string(version));
    }
  }
  const auto body = verify_sealed(bytes, ctx);

  ByteReader r(body, ctx);
  LayerContainer c;
  c.magic = expected_magic;
  r.raw(8);
  r.u32();
  c.input_dim = r.u32();
  c.num_classes = r.u32();
  c.output_dim = r.u32();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    const std::uint8_t tag = r.u8();
    if (tag > static_cast<std::uint8_t>(Activation::ReLU)) {
      throw FormatError(ctx + ": unknown activation tag " + std::to_string(tag));
    }
    const std::uint64_t n = static_cast<std::uint64_t>(rows) * cols;
    if (4 * (n + rows) > r.remaining()) throw CorruptionError(ctx + ": layer payload truncated");
    std::vector<float> w(n);
    for (auto& v : w) v = r.f32();
    std::vector<float> b(rows);
    for (auto& v : b) v = r.f32();
    DenseLayer layer{Matrix(rows, cols, std::move(w)), std::move(b), static_cast<Activation>(tag)};
    if (!layer.weights.all_finite()) throw DataError(ctx + ": non-finite weight in layer " + std::to_string(i));
    c.layers.push_back(std::move(layer));
  }
  const std::uint32_t blob_len = r.u32();
  const std::string blob = r.text(blob_len);
  if (r.remaining() != 0) throw CorruptionError(ctx + ": trailing bytes after metadata");
  try {
    c.metadata = nlohmann::json::parse(blob);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(ctx + ": invalid metadata JSON: " + e.what());
  }
  return c;
}

}  // namespace embanon
