// SPDX-License-Identifier: Apache-2.0
#include "embanon/split.hpp"

#include <algorithm>
#include <cmath>

#include "embanon/errors.hpp"

namespace embanon {

std::size_t validation_quota(std::size_t count, double fraction) {
  if (count < 2) return 0;
  auto quota = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(count) + 0.5));
  return std::clamp<std::size_t>(quota, 1, count - 1);
}

SplitPair stratified_split(const EmbeddingDataset& dataset, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("stratified_split: fraction must lie in (0, 1), got " + std::to_string(fraction));
  }
  dataset.validate();

  std::vector<std::vector<std::size_t>> by_class(dataset.num_classes);
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[dataset.labels[i]].push_back(i);

  std::vector<bool> to_validation(dataset.size(), false);
  for (auto& rows : by_class) {
    const std::size_t quota = validation_quota(rows.size(), fraction);
    if (quota == 0) continue;
    shuffle(std::span<std::size_t>(rows), rng);
    for (std::size_t i = 0; i < quota; ++i) to_validation[rows[i]] = true;
  }

  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    (to_validation[i] ? val_rows : train_rows).push_back(i);
  }
  SplitPair out{dataset.subset(train_rows), dataset.subset(val_rows)};
  out.train.provenance["split"] = {{"part", "train"}, {"fraction", fraction}, {"seed", rng.seed()}};
  out.validation.provenance["split"] = {{"part", "validation"}, {"fraction", fraction}, {"seed", rng.seed()}};
  return out;
}

}  // namespace embanon
