// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "embanon/dataset.hpp"

namespace embanon {

/// Mean over rows of `anonymized` of the Euclidean distance to the nearest row
/// of `original`. Exhaustive search; squared differences accumulate in double.
double avg_nn_distance(const EmbeddingDataset& anonymized, const EmbeddingDataset& original);
double avg_nn_distance(const Matrix& anonymized, const Matrix& original);

struct Dispersion {
  /// Sum of Euclidean distances over all unordered pairs.
  double total = 0.0;
  /// total / (N(N-1)/2); 0 for a single row. Comparable across sizes.
  double mean_pairwise = 0.0;
};

Dispersion max_dispersion(const EmbeddingDataset& dataset);
Dispersion max_dispersion(const Matrix& points);

struct PerturbSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::size_t replicas = 3;

  void validate() const;
};

/// Adds an independent N(0, sigma^2) draw to every feature component, drawn
/// row-major from Rng(seed). sigma = 0 returns the input unchanged.
EmbeddingDataset perturb_gaussian(const EmbeddingDataset& dataset, double sigma, std::uint64_t seed);

/// `spec.replicas` perturbed copies; replica r uses derive_seed(spec.seed, r).
std::vector<EmbeddingDataset> perturb_replicas(const EmbeddingDataset& dataset, const PerturbSpec& spec);

struct PcaProjection {
  MatrixD coordinates;                 // N x target_dims
  MatrixD components;                  // target_dims x d, unit rows
  std::vector<double> explained_share; // per component, fraction of total variance
};

/// Projection of the centered rows onto the leading eigenvectors of the
/// covariance matrix. Each component is signed so that its largest-magnitude
/// entry is positive (the first such entry on ties). Data with zero variance
/// yields zero coordinates, zero components and zero shares.
PcaProjection pca_project(const Matrix& points, std::size_t target_dims = 2);

/// CSV with header `x,y,label`, one row per point.
void write_pca_csv(const std::filesystem::path& path, const PcaProjection& projection,
                   std::span<const std::uint32_t> labels);

}  // namespace embanon
