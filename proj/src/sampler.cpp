// SPDX-License-Identifier: Apache-2.0
#include "embanon/sampler.hpp"

#include <cmath>
#include <numeric>

#include "embanon/errors.hpp"

namespace embanon {

void SamplerConfig::validate() const {
  if (!(sampling_variance > 0.0) || !std::isfinite(sampling_variance)) {
    throw ConfigError("sampling_variance must be finite and > 0");
  }
}

nlohmann::json SamplerConfig::to_json() const {
  return {{"sampling_variance", sampling_variance}, {"seed", seed}};
}

namespace {

constexpr std::size_t kDecodeChunk = 256;

void check_classes(const CvaeDecoder& decoder, std::size_t classes) {
  if (classes != decoder.num_classes) {
    throw DimensionError("class count " + std::to_string(classes) + " does not match decoder's " +
                         std::to_string(decoder.num_classes));
  }
}

void draw_latent(Rng& rng, double scale, std::span<float> z) {
  for (float& v : z) v = static_cast<float>(scale * rng.normal());
}

/// Decodes rows [start, start + n) of `z` into `out`.
void decode_rows(const CvaeDecoder& decoder, const Matrix& z, std::span<const std::uint32_t> labels,
                 Matrix& out) {
  for (std::size_t start = 0; start < z.rows(); start += kDecodeChunk) {
    const std::size_t n = std::min(kDecodeChunk, z.rows() - start);
    Matrix chunk(n, z.cols(),
                 std::vector<float>(z.row(start).data(), z.row(start).data() + n * z.cols()));
    const auto decoded = decode(decoder, chunk, labels.subspan(start, n));
    std::copy(decoded.values().begin(), decoded.values().end(), out.row(start).begin());
  }
}

EmbeddingDataset wrap(const CvaeDecoder& decoder, Matrix features, std::vector<std::uint32_t> labels,
                      nlohmann::json provenance) {
  EmbeddingDataset ds;
  ds.features = std::move(features);
  ds.labels = std::move(labels);
  ds.num_classes = decoder.num_classes;
  if (decoder.metadata.contains("class_names")) {
    auto names = decoder.metadata.at("class_names").get<std::vector<std::string>>();
    if (names.size() == decoder.num_classes) ds.class_names = std::move(names);
  }
  ds.provenance = std::move(provenance);
  return ds;
}

}  // namespace

EmbeddingDataset anonymize_offline(const CvaeDecoder& decoder, const CategoricalDistribution& distribution,
                                   std::size_t n, const SamplerConfig& config) {
  config.validate();
  if (n == 0) throw ConfigError("anonymize_offline: N must be >= 1");
  check_classes(decoder, distribution.size());

  Rng rng(config.seed);
  const double scale = std::sqrt(config.sampling_variance);
  std::vector<std::uint32_t> labels(n);
  Matrix z(n, decoder.latent_dim);
  for (std::size_t j = 0; j < n; ++j) {
    labels[j] = sample_categorical(rng, distribution.probabilities());
    draw_latent(rng, scale, z.row(j));
  }
  Matrix features(n, decoder.output_dim);
  decode_rows(decoder, z, labels, features);

  nlohmann::json prov = {{"method", "cvae-offline"},
                         {"decoder_hash", decoder_hash(decoder)},
                         {"decoder", decoder.metadata},
                         {"sampler", config.to_json()},
                         {"count", n},
                         {"rng", std::string(Rng::algorithm_id)}};
  return wrap(decoder, std::move(features), std::move(labels), std::move(prov));
}

EmbeddingDataset replicate_proportions(const CvaeDecoder& decoder, std::span<const std::uint32_t> labels,
                                       const SamplerConfig& config) {
  config.validate();
  if (labels.empty()) throw ConfigError("replicate_proportions: empty reference");
  for (const auto y : labels) {
    if (y >= decoder.num_classes) throw DataError("reference label exceeds decoder class count");
  }
  Rng rng(config.seed);
  const double scale = std::sqrt(config.sampling_variance);
  Matrix z(labels.size(), decoder.latent_dim);
  for (std::size_t j = 0; j < labels.size(); ++j) draw_latent(rng, scale, z.row(j));
  Matrix features(labels.size(), decoder.output_dim);
  decode_rows(decoder, z, labels, features);

  nlohmann::json prov = {{"method", "cvae-replicate"},
                         {"decoder_hash", decoder_hash(decoder)},
                         {"decoder", decoder.metadata},
                         {"sampler", config.to_json()},
                         {"count", labels.size()},
                         {"rng", std::string(Rng::algorithm_id)}};
  return wrap(decoder, std::move(features), std::vector<std::uint32_t>(labels.begin(), labels.end()),
              std::move(prov));
}

EmbeddingDataset replicate_proportions(const CvaeDecoder& decoder, const EmbeddingDataset& reference,
                                       const SamplerConfig& config) {
  check_classes(decoder, reference.num_classes);
  return replicate_proportions(decoder, std::span<const std::uint32_t>(reference.labels), config);
}

SampleStream::SampleStream(std::shared_ptr<const CvaeDecoder> decoder, CategoricalDistribution distribution,
                           std::size_t batch_size, const SamplerConfig& config)
    : decoder_(std::move(decoder)),
      distribution_(std::move(distribution)),
      batch_size_(batch_size),
      config_(config),
      rng_(config.seed) {
  config_.validate();
  if (!decoder_) throw ConfigError("sample stream needs a decoder");
  if (batch_size_ == 0) throw ConfigError("sample stream batch_size must be >= 1");
  check_classes(*decoder_, distribution_.size());
}

LabeledBatch SampleStream::next() {
  const double scale = std::sqrt(config_.sampling_variance);
  LabeledBatch batch;
  batch.labels.resize(batch_size_);
  Matrix z(batch_size_, decoder_->latent_dim);
  for (std::size_t j = 0; j < batch_size_; ++j) {
    batch.labels[j] = sample_categorical(rng_, distribution_.probabilities());
    draw_latent(rng_, scale, z.row(j));
  }
  batch.features = Matrix(batch_size_, decoder_->output_dim);
  decode_rows(*decoder_, z, batch.labels, batch.features);
  ++batches_drawn_;
  return batch;
}

CategoricalDistribution decoder_class_distribution(const CvaeDecoder& decoder) {
  std::vector<double> p;
  try {
    p = decoder.metadata.at("class_distribution").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("decoder metadata lacks class_distribution: ") + e.what());
  }
  if (p.size() != decoder.num_classes) throw FormatError("decoder class_distribution has the wrong length");
  try {
    return CategoricalDistribution(std::move(p));
  } catch (const DataError& e) {
    throw FormatError(std::string("decoder class_distribution: ") + e.what());
  }
}

std::size_t decoder_reference_size(const CvaeDecoder& decoder) {
  std::size_t n = 0;
  try {
    n = decoder.metadata.at("train_size").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("decoder metadata lacks train_size: ") + e.what());
  }
  if (n == 0) throw FormatError("decoder train_size is zero");
  return n;
}

Matrix class_prototypes(const CvaeDecoder& decoder) {
  std::vector<std::uint32_t> labels(decoder.num_classes);
  std::iota(labels.begin(), labels.end(), 0U);
  return decode(decoder, Matrix(decoder.num_classes, decoder.latent_dim), labels);
}

double mean_prototype_distance(const EmbeddingDataset& generated, const Matrix& prototypes) {
  if (generated.dim() != prototypes.cols()) throw DimensionError("prototype width mismatch");
  if (generated.size() == 0) throw DataError("mean_prototype_distance of an empty set");
  double total = 0.0;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    const auto y = generated.labels[i];
    if (y >= prototypes.rows()) throw DataError("label without a prototype");
    const auto a = generated.features.row(i);
    const auto p = prototypes.row(y);
    double sq = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double diff = static_cast<double>(a[k]) - p[k];
      sq += diff * diff;
    }
    total += std::sqrt(sq);
  }
  return total / static_cast<double>(generated.size());
}

}  // namespace embanon
