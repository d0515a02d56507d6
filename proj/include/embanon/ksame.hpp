// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "embanon/dataset.hpp"

namespace embanon {

struct KSameConfig {
  std::size_t k = 2;
  /// Recorded in provenance; the greedy grouping itself draws no randomness.
  std::uint64_t seed = 0;
};

inline constexpr std::string_view kKSameClusteringRule = "greedy-nn-lowest-index/v1";

/// Disjoint groups of row indices into `points`. Repeatedly the lowest-index
/// unassigned row becomes an anchor and takes its k-1 nearest unassigned rows
/// (Euclidean, ties to the lower index). Fewer than k leftovers form one final
/// smaller group. Each group lists the anchor first, then members by distance.
std::vector<std::vector<std::size_t>> cluster_within_class(const Matrix& points, std::size_t k);

/// Replaces every row with the mean of its group, groups formed within each
/// class separately. Labels, row order and size are unchanged.
EmbeddingDataset ksame_anonymize(const EmbeddingDataset& dataset, const KSameConfig& config);

}  // namespace embanon
