// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "embanon/dataset.hpp"

namespace embanon {

/// Embedding interchange file, little-endian:
///
///   offset  size        field
///   0       8           magic "EMBDSET1"
///   8       4   u32     version (= 1)
///   12      8   u64     N (rows)
///   20      4   u32     d (feature width)
///   24      4   u32     C (class count)
///   28      4   u32     L (metadata length)
///   32      L           UTF-8 JSON {"class_names"?: [...], "provenance"?: {...}}
///   32+L    4*N*d f32   features, row-major
///   ...     4*N   u32   labels
///   ...     8     u64   CRC-64/XZ of every preceding byte
inline constexpr char kDatasetMagic[8] = {'E', 'M', 'B', 'D', 'S', 'E', 'T', '1'};
inline constexpr std::uint32_t kDatasetVersion = 1;

std::vector<std::uint8_t> serialize_dataset(const EmbeddingDataset& dataset);

/// Throws FormatError (magic/version/metadata), CorruptionError (length or
/// checksum) or DataError (invariant violation). Never returns a partial dataset.
EmbeddingDataset deserialize_dataset(std::span<const std::uint8_t> bytes);

void write_dataset(const EmbeddingDataset& dataset, const std::filesystem::path& path);
EmbeddingDataset read_dataset(const std::filesystem::path& path);

/// CSV with header `label,f0,f1,...`. C defaults to max(label) + 1.
EmbeddingDataset read_csv_dataset(const std::filesystem::path& path,
                                  std::optional<std::uint32_t> num_classes = std::nullopt);

/// CRC-64 of the canonical serialization, as 16 hex digits.
std::string dataset_hash(const EmbeddingDataset& dataset);

}  // namespace embanon
