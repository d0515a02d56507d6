// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "embanon/dataset.hpp"
#include "embanon/rng.hpp"

namespace embanon {

struct SplitPair {
  EmbeddingDataset train;
  EmbeddingDataset validation;
};

/// Validation rows drawn for a class of `count` rows: round-half-up of
/// fraction * count, raised to 1 and capped at count - 1 when count >= 2.
/// A class with a single row keeps it in train.
std::size_t validation_quota(std::size_t count, double fraction);

/// Per-class uniform selection (classes visited in index order, each shuffled
/// with `rng`). Both halves keep the original relative row order.
SplitPair stratified_split(const EmbeddingDataset& dataset, double fraction, Rng& rng);

}  // namespace embanon
