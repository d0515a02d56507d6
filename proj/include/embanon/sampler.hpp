// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <nlohmann/json.hpp>
#include <span>

#include "embanon/dataset.hpp"
#include "embanon/decoder.hpp"
#include "embanon/rng.hpp"

namespace embanon {

struct SamplerConfig {
  /// Latent draws are z ~ N(0, sampling_variance * I).
  double sampling_variance = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
};

/// Synthetic replica of size n. For each row in turn: a label is drawn from
/// `distribution`, then latent_dim normals scaled by sqrt(sampling_variance),
/// and the pair is decoded. With sampling_variance = 1 this is the plain
/// sample-a-class, sample-a-standard-normal, decode loop.
EmbeddingDataset anonymize_offline(const CvaeDecoder& decoder, const CategoricalDistribution& distribution,
                                   std::size_t n, const SamplerConfig& config);

/// One generated row per entry of `labels`, in that order: exact class counts
/// rather than sampled ones. Only the label sequence is consulted.
EmbeddingDataset replicate_proportions(const CvaeDecoder& decoder, std::span<const std::uint32_t> labels,
                                       const SamplerConfig& config);

EmbeddingDataset replicate_proportions(const CvaeDecoder& decoder, const EmbeddingDataset& reference,
                                       const SamplerConfig& config);

/// Unbounded generator of fresh batches. Nothing is retained between pulls;
/// the only inputs are the decoder, the class distribution and the config.
class SampleStream {
 public:
  SampleStream(std::shared_ptr<const CvaeDecoder> decoder, CategoricalDistribution distribution,
               std::size_t batch_size, const SamplerConfig& config);

  LabeledBatch next();

  std::size_t batch_size() const noexcept { return batch_size_; }
  std::uint64_t batches_drawn() const noexcept { return batches_drawn_; }
  const CvaeDecoder& decoder() const noexcept { return *decoder_; }
  const CategoricalDistribution& distribution() const noexcept { return distribution_; }
  const SamplerConfig& config() const noexcept { return config_; }

 private:
  std::shared_ptr<const CvaeDecoder> decoder_;
  CategoricalDistribution distribution_;
  std::size_t batch_size_;
  SamplerConfig config_;
  Rng rng_;
  std::uint64_t batches_drawn_ = 0;
};

/// Class distribution recorded in the decoder's metadata at training time.
/// Throws FormatError when absent or inconsistent with the decoder.
CategoricalDistribution decoder_class_distribution(const CvaeDecoder& decoder);

/// Training-set size recorded in the decoder's metadata (the reference N for
/// stream epochs). Throws FormatError when absent.
std::size_t decoder_reference_size(const CvaeDecoder& decoder);

/// decode(0, c) for every class, one row per class.
Matrix class_prototypes(const CvaeDecoder& decoder);

/// Mean Euclidean distance from each row to the prototype of its label.
double mean_prototype_distance(const EmbeddingDataset& generated, const Matrix& prototypes);

}  // namespace embanon
