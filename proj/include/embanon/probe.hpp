// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <span>
#include <vector>

#include "embanon/dataset.hpp"
#include "embanon/dense.hpp"
#include "embanon/rng.hpp"
#include "embanon/sampler.hpp"

namespace embanon {

/// Linear classifier: logits = W x' + b with W of shape C x d. When
/// `standardize` is set, x' = (x - shift) / scale per component; otherwise x' = x.
struct ProbeParams {
  DenseLayer layer;
  bool standardize = false;
  std::vector<float> shift;
  std::vector<float> scale;

  std::size_t input_dim() const noexcept { return layer.in_dim(); }
  std::size_t num_classes() const noexcept { return layer.out_dim(); }
  void validate() const;
  bool operator==(const ProbeParams&) const = default;
};

struct ProbeTrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 500;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  bool standardize = false;

  void validate() const;
  nlohmann::json to_json() const;
  static ProbeTrainConfig from_json(const nlohmann::json& j);
};

/// Where the probe's training batches come from. The trainer sees nothing else.
class BatchSource {
 public:
  virtual ~BatchSource() = default;
  virtual std::size_t dim() const = 0;
  virtual std::uint32_t num_classes() const = 0;
  virtual std::size_t batches_per_epoch() const = 0;
  /// Called once before each epoch with the trainer's generator.
  virtual void begin_epoch(Rng& rng) = 0;
  virtual LabeledBatch next_batch() = 0;
};

/// Mini-batches over a fixed dataset, reshuffled every epoch; the final batch
/// of an epoch may be short.
class DatasetSource final : public BatchSource {
 public:
  DatasetSource(const EmbeddingDataset& dataset, std::size_t batch_size);

  std::size_t dim() const override { return dataset_.dim(); }
  std::uint32_t num_classes() const override { return dataset_.num_classes; }
  std::size_t batches_per_epoch() const override;
  void begin_epoch(Rng& rng) override;
  LabeledBatch next_batch() override;

 private:
  const EmbeddingDataset& dataset_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

/// Fresh decoder samples on every pull. An epoch is ceil(reference_size / batch_size) pulls.
class StreamSource final : public BatchSource {
 public:
  StreamSource(SampleStream& stream, std::size_t reference_size);

  std::size_t dim() const override { return stream_.decoder().output_dim; }
  std::uint32_t num_classes() const override { return stream_.decoder().num_classes; }
  std::size_t batches_per_epoch() const override { return batches_per_epoch_; }
  void begin_epoch(Rng&) override {}
  LabeledBatch next_batch() override { return stream_.next(); }

 private:
  SampleStream& stream_;
  std::size_t batches_per_epoch_;
};

struct ProbeEpoch {
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct ProbeHistory {
  double initial_val_loss = 0.0;
  std::vector<ProbeEpoch> epochs;
  std::size_t best_epoch = 0;

  nlohmann::json to_json() const;
};

struct ProbeTrainResult {
  ProbeParams params;
  ProbeHistory history;
};

template <typename T>
struct ProbeGradients {
  double loss = 0.0;
  LayerGradient<T> layer;
};

/// Mean softmax cross-entropy of a bare linear layer, with analytic gradients.
template <typename T>
ProbeGradients<T> probe_loss_and_gradients(const BasicDenseLayer<T>& layer, const BasicMatrix<T>& features,
                                           std::span<const std::uint32_t> labels);

/// All-zero weights and bias (uniform predictions), no standardization.
ProbeParams init_probe(std::size_t dim, std::uint32_t num_classes);

/// Adam on mean cross-entropy, early stopping on validation cross-entropy.
/// Returns the best-epoch parameters (the initial ones when max_epochs = 0).
/// With `standardize`, shift and scale come from the first training batch.
ProbeTrainResult train_probe(BatchSource& source, const EmbeddingDataset& validation,
                             const ProbeTrainConfig& config);

ProbeTrainResult train_probe(const EmbeddingDataset& train, const EmbeddingDataset& validation,
                             const ProbeTrainConfig& config);

/// Row-wise softmax probabilities, N x C.
MatrixD predict_scores(const ProbeParams& params, const Matrix& features);

double probe_cross_entropy(const ProbeParams& params, const EmbeddingDataset& dataset);

/// Mann-Whitney AUC for one binary problem; ties count one half.
/// Throws DataError unless both classes are present.
double auc_binary(std::span<const double> scores, std::span<const std::uint8_t> positive);

struct AucReport {
  double macro = 0.0;
  /// NaN for classes that were skipped.
  std::vector<double> per_class;
  std::vector<std::uint32_t> skipped_classes;

  nlohmann::json to_json() const;
};

/// One-vs-rest AUC per column of `scores`, averaged over classes that have at
/// least one positive and one negative. Throws DataError when none qualify.
AucReport auc_macro(const MatrixD& scores, std::span<const std::uint32_t> labels);

inline constexpr char kProbeMagic[9] = "PROBEW01";

std::vector<std::uint8_t> serialize_probe(const ProbeParams& params, const nlohmann::json& metadata);
ProbeParams deserialize_probe(std::span<const std::uint8_t> bytes, nlohmann::json* metadata = nullptr);
void save_probe(const std::filesystem::path& path, const ProbeParams& params, const nlohmann::json& metadata);
ProbeParams load_probe(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

}  // namespace embanon
