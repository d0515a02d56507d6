// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "embanon/matrix.hpp"

namespace embanon {

/// N labeled feature vectors of width d over C classes.
struct EmbeddingDataset {
  Matrix features;                       // N x d
  std::vector<std::uint32_t> labels;     // N, each < num_classes
  std::uint32_t num_classes = 0;
  std::vector<std::string> class_names;  // empty or exactly num_classes entries
  nlohmann::json provenance = nlohmann::json::object();

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }

  /// Throws DataError unless N >= 1, d >= 1, C >= 1, labels match rows and lie
  /// in [0, C), every feature is finite and class_names is empty or has C entries.
  void validate() const;

  /// Number of rows per class; length num_classes.
  std::vector<std::size_t> class_counts() const;

  /// Rows in the given order. Class metadata and provenance are carried over.
  EmbeddingDataset subset(std::span<const std::size_t> rows) const;
};

/// A mini-batch handed to a trainer.
struct LabeledBatch {
  Matrix features;
  std::vector<std::uint32_t> labels;
};

/// Probability per class; sums to one.
class CategoricalDistribution {
 public:
  /// Throws DataError when empty, negative, non-finite, or not summing to 1 within 1e-9.
  explicit CategoricalDistribution(std::vector<double> probabilities);

  static CategoricalDistribution from_counts(std::span<const std::size_t> counts);

  std::span<const double> probabilities() const noexcept { return probabilities_; }
  std::size_t size() const noexcept { return probabilities_.size(); }
  double operator[](std::size_t c) const { return probabilities_.at(c); }

 private:
  std::vector<double> probabilities_;
};

CategoricalDistribution class_distribution(const EmbeddingDataset& dataset);

}  // namespace embanon
