// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "embanon/dataset.hpp"
#include "embanon/rng.hpp"

namespace embanon {

/// Isotropic Gaussian blob per class.
struct MixtureSpec {
  std::vector<std::vector<float>> means;  // one per class, all of width d
  double stddev = 1.0;

  /// Class c centred at (separation / sqrt 2) * e_c, so every pair of means is
  /// exactly `separation` apart. Requires num_classes <= d.
  static MixtureSpec on_axes(std::size_t num_classes, std::size_t d, double separation,
                             double stddev);
};

/// `counts[c]` rows of class c, emitted class by class. Provenance records the mixture parameters.
EmbeddingDataset synth_mixture(const MixtureSpec& spec, std::span<const std::size_t> counts,
                               std::size_t d, Rng& rng);

EmbeddingDataset synth_mixture(const MixtureSpec& spec, std::size_t n_per_class, std::size_t d,
                               Rng& rng);

}  // namespace embanon
