// SPDX-License-Identifier: Apache-2.0
#include "embanon/ksame.hpp"

#include <algorithm>
#include <numeric>

#include "embanon/errors.hpp"

namespace embanon {

namespace {

double squared_distance(std::span<const float> a, std::span<const float> b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = static_cast<double>(a[i]) - b[i];
    sq += diff * diff;
  }
  return sq;
}

}  // namespace

std::vector<std::vector<std::size_t>> cluster_within_class(const Matrix& points, std::size_t k) {
  if (k == 0) throw ConfigError("k-Same needs k >= 1");
  const std::size_t n = points.rows();
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> unassigned(n);
  std::iota(unassigned.begin(), unassigned.end(), std::size_t{0});

  std::vector<std::pair<double, std::size_t>> candidates;
  while (!unassigned.empty()) {
    const std::size_t anchor = unassigned.front();
    candidates.clear();
    for (std::size_t i = 1; i < unassigned.size(); ++i) {
      const std::size_t j = unassigned[i];
      candidates.emplace_back(squared_distance(points.row(anchor), points.row(j)), j);
    }
    const std::size_t take = std::min(k - 1, candidates.size());
    // Pairs order by distance, then by index, which is the tie rule.
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                      candidates.end());

    std::vector<std::size_t> group{anchor};
    for (std::size_t i = 0; i < take; ++i) group.push_back(candidates[i].second);

    std::vector<std::size_t> sorted_group = group;
    std::sort(sorted_group.begin(), sorted_group.end());
    std::vector<std::size_t> rest;
    rest.reserve(unassigned.size() - group.size());
    std::set_difference(unassigned.begin(), unassigned.end(), sorted_group.begin(), sorted_group.end(),
                        std::back_inserter(rest));
    unassigned = std::move(rest);
    groups.push_back(std::move(group));
  }
  return groups;
}

EmbeddingDataset ksame_anonymize(const EmbeddingDataset& dataset, const KSameConfig& config) {
  if (config.k == 0) throw ConfigError("k-Same needs k >= 1");
  dataset.validate();

  EmbeddingDataset out = dataset;
  const std::size_t d = dataset.dim();
  std::vector<std::vector<std::size_t>> rows_by_class(dataset.num_classes);
  for (std::size_t i = 0; i < dataset.size(); ++i) rows_by_class[dataset.labels[i]].push_back(i);

  std::size_t group_count = 0;
  std::vector<double> centroid(d);
  for (const auto& rows : rows_by_class) {
    if (rows.empty()) continue;
    const auto class_points = dataset.subset(rows).features;
    for (const auto& group : cluster_within_class(class_points, config.k)) {
      ++group_count;
      std::fill(centroid.begin(), centroid.end(), 0.0);
      for (const auto local : group) {
        const auto x = class_points.row(local);
        for (std::size_t j = 0; j < d; ++j) centroid[j] += x[j];
      }
      const auto size = static_cast<double>(group.size());
      for (const auto local : group) {
        auto y = out.features.row(rows[local]);
        for (std::size_t j = 0; j < d; ++j) y[j] = static_cast<float>(centroid[j] / size);
      }
    }
  }
  out.provenance = {{"method", "ksame"},
                    {"k", config.k},
                    {"seed", config.seed},
                    {"clustering_rule", std::string(kKSameClusteringRule)},
                    {"groups", group_count},
                    {"source", dataset.provenance}};
  return out;
}

}  // namespace embanon
