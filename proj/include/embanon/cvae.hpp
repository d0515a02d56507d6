// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "embanon/dataset.hpp"
#include "embanon/dense.hpp"
#include "embanon/rng.hpp"

namespace embanon {

/// Layer widths. The encoder trunk is (d + C) -> hidden1 -> hidden2 (ReLU),
/// the heads map hidden2 -> latent_dim (identity) and the decoder mirrors the
/// trunk: (latent_dim + C) -> hidden2 -> hidden1 (ReLU) -> d (identity).
struct CvaeArch {
  std::uint32_t input_dim = 0;
  std::uint32_t num_classes = 0;
  std::uint32_t hidden1 = 256;
  std::uint32_t hidden2 = 100;
  std::uint32_t latent_dim = 100;

  void validate() const;
  nlohmann::json to_json() const;
  friend bool operator==(const CvaeArch&, const CvaeArch&) = default;
};

template <typename T>
struct BasicCvaeNet {
  static constexpr std::size_t kTrunk = 0;
  static constexpr std::size_t kMuHead = 2;
  static constexpr std::size_t kLogvarHead = 3;
  static constexpr std::size_t kDecoder = 4;
  static constexpr std::size_t kLayerCount = 7;

  CvaeArch arch;
  /// trunk0, trunk1, mu head, logvar head, decoder0, decoder1, decoder2.
  std::vector<BasicDenseLayer<T>> layers;

  std::span<const BasicDenseLayer<T>> encoder_trunk() const { return {layers.data() + kTrunk, 2}; }
  std::span<const BasicDenseLayer<T>> mu_head() const { return {layers.data() + kMuHead, 1}; }
  std::span<const BasicDenseLayer<T>> logvar_head() const { return {layers.data() + kLogvarHead, 1}; }
  std::span<const BasicDenseLayer<T>> decoder() const { return {layers.data() + kDecoder, 3}; }

  /// Throws DimensionError when any layer disagrees with `arch`.
  void validate() const;

  template <typename U>
  BasicCvaeNet<U> cast() const {
    BasicCvaeNet<U> out{arch, {}};
    for (const auto& l : layers) out.layers.push_back(l.template cast<U>());
    return out;
  }
};

using CvaeParams = BasicCvaeNet<float>;

/// Glorot-uniform weights and zero biases, drawn layer by layer from `rng`.
CvaeParams init_cvae(const CvaeArch& arch, Rng& rng);

template <typename T>
struct Posterior {
  BasicMatrix<T> mu;
  BasicMatrix<T> logvar;
};

template <typename T>
Posterior<T> encode(const BasicCvaeNet<T>& net, const BasicMatrix<T>& features,
                    std::span<const std::uint32_t> labels);

/// z = mu + exp(logvar / 2) * eps with the given noise.
template <typename T>
BasicMatrix<T> reparameterize(const BasicMatrix<T>& mu, const BasicMatrix<T>& logvar,
                              const BasicMatrix<T>& eps);

/// Draws eps ~ N(0, 1) row by row from `rng`, then applies the map above.
template <typename T>
BasicMatrix<T> reparameterize(const BasicMatrix<T>& mu, const BasicMatrix<T>& logvar, Rng& rng);

template <typename T>
BasicMatrix<T> decode(const BasicCvaeNet<T>& net, const BasicMatrix<T>& z,
                      std::span<const std::uint32_t> labels);

/// Decoder stack applied to [z | one_hot(label)], shared by the full network and
/// the standalone decoder.
template <typename T>
BasicMatrix<T> decode_with(std::span<const BasicDenseLayer<T>> decoder, std::uint32_t latent_dim,
                           std::uint32_t num_classes, const BasicMatrix<T>& z,
                           std::span<const std::uint32_t> labels);

struct ElboTerms {
  double total = 0.0;
  double recon = 0.0;  // mean over all B x d elements of the squared error
  double kl = 0.0;     // mean over rows of 0.5 * sum(exp(logvar) + mu^2 - 1 - logvar)
};

/// total = recon + beta * kl. Throws NumericError when any term is non-finite.
template <typename T>
ElboTerms elbo_loss(const BasicMatrix<T>& features, const BasicMatrix<T>& reconstruction,
                    const BasicMatrix<T>& mu, const BasicMatrix<T>& logvar, double beta);

template <typename T>
struct CvaeGradients {
  ElboTerms loss;
  std::vector<LayerGradient<T>> layers;  // same order as BasicCvaeNet::layers
};

/// Loss of encode -> reparameterize(eps) -> decode against `features`.
template <typename T>
ElboTerms cvae_loss(const BasicCvaeNet<T>& net, const BasicMatrix<T>& features,
                    std::span<const std::uint32_t> labels, const BasicMatrix<T>& eps, double beta);

/// Loss and analytic gradients for every layer, with eps held fixed.
template <typename T>
CvaeGradients<T> cvae_loss_and_gradients(const BasicCvaeNet<T>& net, const BasicMatrix<T>& features,
                                         std::span<const std::uint32_t> labels,
                                         const BasicMatrix<T>& eps, double beta);

struct CvaeTrainConfig {
  double learning_rate = 1e-3;
  double beta = 0.1;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 500;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  std::uint32_t hidden1 = 256;
  std::uint32_t hidden2 = 100;
  std::uint32_t latent_dim = 100;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys throw ConfigError.
  static CvaeTrainConfig from_json(const nlohmann::json& j);
};

struct EpochRecord {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_recon = 0.0;
  double val_kl = 0.0;
};

struct TrainHistory {
  ElboTerms initial_validation;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;

  nlohmann::json to_json() const;
};

struct CvaeTrainResult {
  CvaeParams params;
  TrainHistory history;
};

/// Mini-batch Adam on the ELBO. Validation loss uses one fixed noise draw for
/// the whole run, so epochs are compared on equal terms. Training stops after
/// `patience` epochs without strict improvement; the best epoch's parameters
/// are returned. Throws NumericError on a non-finite loss.
CvaeTrainResult train_cvae(const EmbeddingDataset& train, const EmbeddingDataset& validation,
                           const CvaeTrainConfig& config);

}  // namespace embanon
