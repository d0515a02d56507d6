// SPDX-License-Identifier: Apache-2.0
#include "embanon/dataset.hpp"

#include <cmath>
#include <numeric>

#include "embanon/errors.hpp"

namespace embanon {

void EmbeddingDataset::validate() const {
  if (features.rows() == 0) throw DataError("dataset has no rows");
  if (features.cols() == 0) throw DataError("dataset has zero feature width");
  if (num_classes == 0) throw DataError("dataset declares zero classes");
  if (labels.size() != features.rows()) {
    throw DataError("dataset has " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(features.rows()) + " rows");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw DataError("row " + std::to_string(i) + ": label " + std::to_string(labels[i]) +
                      " >= num_classes " + std::to_string(num_classes));
    }
  }
  const auto values = features.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DataError("non-finite feature at row " + std::to_string(i / features.cols()) +
                      ", column " + std::to_string(i % features.cols()));
    }
  }
  if (!class_names.empty() && class_names.size() != num_classes) {
    throw DataError("class_names has " + std::to_string(class_names.size()) + " entries for " +
                    std::to_string(num_classes) + " classes");
  }
}

std::vector<std::size_t> EmbeddingDataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (const auto y : labels) {
    if (y >= num_classes) throw DataError("label out of range in class_counts");
    ++counts[y];
  }
  return counts;
}

EmbeddingDataset EmbeddingDataset::subset(std::span<const std::size_t> rows) const {
  EmbeddingDataset out;
  out.num_classes = num_classes;
  out.class_names = class_names;
  out.provenance = provenance;
  out.features = Matrix(rows.size(), dim());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= size()) throw DimensionError("subset row index out of range");
    const auto src = features.row(rows[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels.push_back(labels[rows[i]]);
  }
  return out;
}

CategoricalDistribution::CategoricalDistribution(std::vector<double> probabilities)
    : probabilities_(std::move(probabilities)) {
  if (probabilities_.empty()) throw DataError("categorical distribution over zero classes");
  double total = 0.0;
  for (const double p : probabilities_) {
    if (!std::isfinite(p) || p < 0.0) throw DataError("categorical probability must be finite and >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw DataError("categorical probabilities sum to " + std::to_string(total));
  }
}

CategoricalDistribution CategoricalDistribution::from_counts(std::span<const std::size_t> counts) {
  const std::size_t n = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (n == 0) throw DataError("class counts are all zero");
  std::vector<double> p(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) {
    p[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
  }
  return CategoricalDistribution(std::move(p));
}

CategoricalDistribution class_distribution(const EmbeddingDataset& dataset) {
  if (dataset.size() == 0) throw DataError("class_distribution of an empty dataset");
  return CategoricalDistribution::from_counts(dataset.class_counts());
}

}  // namespace embanon
