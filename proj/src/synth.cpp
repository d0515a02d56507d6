// SPDX-License-Identifier: Apache-2.0
#include "embanon/synth.hpp"

#include <cmath>

#include "embanon/errors.hpp"

namespace embanon {

MixtureSpec MixtureSpec::on_axes(std::size_t num_classes, std::size_t d, double separation,
                                 double stddev) {
  if (num_classes == 0 || num_classes > d) {
    throw ConfigError("on_axes mixture needs 1 <= classes <= d (classes=" +
                      std::to_string(num_classes) + ", d=" + std::to_string(d) + ")");
  }
  MixtureSpec spec;
  spec.stddev = stddev;
  const auto offset = static_cast<float>(separation / std::sqrt(2.0));
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::vector<float> mean(d, 0.0F);
    mean[c] = offset;
    spec.means.push_back(std::move(mean));
  }
  return spec;
}

EmbeddingDataset synth_mixture(const MixtureSpec& spec, std::span<const std::size_t> counts,
                               std::size_t d, Rng& rng) {
  if (spec.means.empty()) throw ConfigError("mixture has no classes");
  if (counts.size() != spec.means.size()) {
    throw ConfigError("mixture: " + std::to_string(counts.size()) + " counts for " +
                      std::to_string(spec.means.size()) + " classes");
  }
  if (!(spec.stddev >= 0.0) || !std::isfinite(spec.stddev)) {
    throw ConfigError("mixture stddev must be finite and non-negative");
  }
  for (const auto& m : spec.means) {
    if (m.size() != d) throw DimensionError("mixture mean width differs from d");
  }

  std::size_t total = 0;
  for (const auto n : counts) total += n;

  EmbeddingDataset ds;
  ds.num_classes = static_cast<std::uint32_t>(spec.means.size());
  ds.features = Matrix(total, d);
  ds.labels.reserve(total);
  std::size_t row = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i, ++row) {
      auto out = ds.features.row(row);
      for (std::size_t j = 0; j < d; ++j) {
        out[j] = static_cast<float>(spec.means[c][j] + spec.stddev * rng.normal());
      }
      ds.labels.push_back(static_cast<std::uint32_t>(c));
    }
  }
  ds.provenance = {{"generator", "gaussian-mixture"},
                   {"means", spec.means},
                   {"stddev", spec.stddev},
                   {"counts", std::vector<std::size_t>(counts.begin(), counts.end())},
                   {"seed", rng.seed()},
                   {"rng", std::string(Rng::algorithm_id)}};
  return ds;
}

EmbeddingDataset synth_mixture(const MixtureSpec& spec, std::size_t n_per_class, std::size_t d,
                               Rng& rng) {
  const std::vector<std::size_t> counts(spec.means.size(), n_per_class);
  return synth_mixture(spec, counts, d, rng);
}

}  // namespace embanon
