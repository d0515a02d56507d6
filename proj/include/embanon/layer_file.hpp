// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "embanon/dense.hpp"

namespace embanon {

/// Container for a conditioned layer stack, little-endian:
///
///   magic[8]
///   u32 version (= 1)
///   u32 input_dim     (width of the non-conditioning input: latent dim for a decoder, d for a probe)
///   u32 num_classes
///   u32 output_dim
///   u32 layer_count
///   per layer: u32 rows, u32 cols, u8 activation (0 identity, 1 relu),
///              f32[rows*cols] weights row-major, f32[rows] bias
///   u32 metadata length, UTF-8 JSON metadata
///   u64 CRC-64/XZ of every preceding byte
struct LayerContainer {
  std::array<char, 8> magic{};
  std::uint32_t input_dim = 0;
  std::uint32_t num_classes = 0;
  std::uint32_t output_dim = 0;
  std::vector<DenseLayer> layers;
  nlohmann::json metadata = nlohmann::json::object();
};

inline constexpr std::uint32_t kLayerContainerVersion = 1;

std::vector<std::uint8_t> serialize_layers(const LayerContainer& container);

/// `expected_magic` must match; otherwise FormatError.
LayerContainer deserialize_layers(std::span<const std::uint8_t> bytes,
                                  const std::array<char, 8>& expected_magic);

/// Exact serialized size for the given layer shapes and metadata length.
std::size_t layer_container_size(std::span<const DenseLayer> layers, std::size_t metadata_bytes);

std::array<char, 8> make_magic(const char (&text)[9]);

}  // namespace embanon
