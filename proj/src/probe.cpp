// SPDX-License-Identifier: Apache-2.0
#include "embanon/probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "embanon/adam.hpp"
#include "embanon/binary_io.hpp"
#include "embanon/errors.hpp"
#include "embanon/layer_file.hpp"

namespace embanon {

void ProbeParams::validate() const {
  layer.validate();
  if (layer.activation != Activation::Identity) throw FormatError("probe layer must be linear");
  if (standardize) {
    if (shift.size() != input_dim() || scale.size() != input_dim()) {
      throw DimensionError("probe standardization vectors do not match input width");
    }
    for (const float s : scale) {
      if (!(s > 0.0F) || !std::isfinite(s)) throw DataError("probe standardization scale must be > 0");
    }
  } else if (!shift.empty() || !scale.empty()) {
    throw DataError("probe carries standardization vectors while standardize is off");
  }
}

void ProbeTrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("probe: learning_rate must be >= 0");
  }
  if (batch_size == 0) throw ConfigError("probe: batch_size must be >= 1");
  if (patience == 0) throw ConfigError("probe: patience must be >= 1");
}

nlohmann::json ProbeTrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"batch_size", batch_size}, {"max_epochs", max_epochs},
          {"patience", patience},           {"seed", seed},             {"standardize", standardize}};
}

ProbeTrainConfig ProbeTrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("probe config must be a JSON object");
  ProbeTrainConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "max_epochs") c.max_epochs = value.get<std::size_t>();
      else if (key == "patience") c.patience = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "standardize") c.standardize = value.get<bool>();
      else throw ConfigError("probe config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("probe config: ") + e.what());
  }
  c.validate();
  return c;
}

DatasetSource::DatasetSource(const EmbeddingDataset& dataset, std::size_t batch_size)
    : dataset_(dataset), batch_size_(batch_size), order_(dataset.size()) {
  if (batch_size_ == 0) throw ConfigError("batch_size must be >= 1");
  dataset_.validate();
  std::iota(order_.begin(), order_.end(), std::size_t{0});
}

std::size_t DatasetSource::batches_per_epoch() const {
  return (dataset_.size() + batch_size_ - 1) / batch_size_;
}

void DatasetSource::begin_epoch(Rng& rng) {
  shuffle(std::span<std::size_t>(order_), rng);
  cursor_ = 0;
}

LabeledBatch DatasetSource::next_batch() {
  if (cursor_ >= order_.size()) cursor_ = 0;
  const std::size_t stop = std::min(order_.size(), cursor_ + batch_size_);
  auto sub = dataset_.subset(std::span<const std::size_t>(order_.data() + cursor_, stop - cursor_));
  cursor_ = stop;
  return {std::move(sub.features), std::move(sub.labels)};
}

StreamSource::StreamSource(SampleStream& stream, std::size_t reference_size)
    : stream_(stream),
      batches_per_epoch_((reference_size + stream.batch_size() - 1) / stream.batch_size()) {
  if (reference_size == 0) throw ConfigError("stream epoch needs a reference size >= 1");
}

nlohmann::json ProbeHistory::to_json() const {
  nlohmann::json epochs_json = nlohmann::json::array();
  for (const auto& e : epochs) epochs_json.push_back({{"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
  return {{"initial_val_loss", initial_val_loss}, {"epochs", std::move(epochs_json)}, {"best_epoch", best_epoch}};
}

namespace {

/// Mean cross-entropy over rows of `logits`; optionally fills d(loss)/d(logits).
template <typename T>
double softmax_cross_entropy(const BasicMatrix<T>& logits, std::span<const std::uint32_t> labels,
                             BasicMatrix<T>* grad) {
  const std::size_t n = logits.rows();
  const std::size_t c = logits.cols();
  if (labels.size() != n) throw DimensionError("label count does not match rows");
  if (n == 0) throw DataError("cross-entropy of an empty batch");
  std::vector<double> p(c);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto z = logits.row(i);
    if (labels[i] >= c) throw DataError("label exceeds probe class count");
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      p[k] = std::exp(static_cast<double>(z[k]) - top);
      sum += p[k];
    }
    total += top + std::log(sum) - static_cast<double>(z[labels[i]]);
    if (grad != nullptr) {
      auto g = grad->row(i);
      for (std::size_t k = 0; k < c; ++k) {
        const double target = k == labels[i] ? 1.0 : 0.0;
        g[k] = static_cast<T>((p[k] / sum - target) / static_cast<double>(n));
      }
    }
  }
  const double loss = total / static_cast<double>(n);
  if (!std::isfinite(loss)) throw NumericError("non-finite probe loss");
  return loss;
}

Matrix prepare(const ProbeParams& params, const Matrix& features) {
  if (features.cols() != params.input_dim()) {
    throw DimensionError("probe expects width " + std::to_string(params.input_dim()) + ", got " +
                         std::to_string(features.cols()));
  }
  if (!params.standardize) return features;
  Matrix out = features;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto x = out.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) {
      x[j] = static_cast<float>((static_cast<double>(x[j]) - params.shift[j]) / params.scale[j]);
    }
  }
  return out;
}

void fit_standardization(ProbeParams& params, const Matrix& sample) {
  const std::size_t d = sample.cols();
  std::vector<double> mean(d, 0.0);
  std::vector<double> sq(d, 0.0);
  for (std::size_t i = 0; i < sample.rows(); ++i) {
    const auto x = sample.row(i);
    for (std::size_t j = 0; j < d; ++j) mean[j] += x[j];
  }
  const auto n = static_cast<double>(sample.rows());
  for (auto& m : mean) m /= n;
  for (std::size_t i = 0; i < sample.rows(); ++i) {
    const auto x = sample.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = x[j] - mean[j];
      sq[j] += diff * diff;
    }
  }
  params.standardize = true;
  params.shift.resize(d);
  params.scale.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double sd = std::sqrt(sq[j] / n);
    params.shift[j] = static_cast<float>(mean[j]);
    params.scale[j] = sd > 0.0 && std::isfinite(sd) ? static_cast<float>(sd) : 1.0F;
  }
}

}  // namespace

template <typename T>
ProbeGradients<T> probe_loss_and_gradients(const BasicDenseLayer<T>& layer, const BasicMatrix<T>& features,
                                           std::span<const std::uint32_t> labels) {
  const std::span<const BasicDenseLayer<T>> layers(&layer, 1);
  const auto logits = forward<T>(layers, features);
  BasicMatrix<T> grad(logits.rows(), logits.cols());
  ProbeGradients<T> out;
  out.loss = softmax_cross_entropy(logits, labels, &grad);
  auto back = backward<T>(layers, features, grad);
  out.layer = std::move(back.layers.front());
  return out;
}

template ProbeGradients<float> probe_loss_and_gradients<float>(const DenseLayer&, const Matrix&,
                                                               std::span<const std::uint32_t>);
template ProbeGradients<double> probe_loss_and_gradients<double>(const BasicDenseLayer<double>&,
                                                                 const MatrixD&,
                                                                 std::span<const std::uint32_t>);

ProbeParams init_probe(std::size_t dim, std::uint32_t num_classes) {
  if (dim == 0 || num_classes == 0) throw ConfigError("probe needs d >= 1 and C >= 1");
  DenseLayer layer{Matrix(num_classes, dim), std::vector<float>(num_classes, 0.0F), Activation::Identity};
  return {std::move(layer), false, {}, {}};
}

double probe_cross_entropy(const ProbeParams& params, const EmbeddingDataset& dataset) {
  if (dataset.num_classes != params.num_classes()) throw DimensionError("probe class count mismatch");
  const std::span<const DenseLayer> layers(&params.layer, 1);
  const auto logits = forward<float>(layers, prepare(params, dataset.features));
  return softmax_cross_entropy<float>(logits, dataset.labels, nullptr);
}

ProbeTrainResult train_probe(BatchSource& source, const EmbeddingDataset& validation,
                             const ProbeTrainConfig& config) {
  config.validate();
  validation.validate();
  if (source.dim() != validation.dim() || source.num_classes() != validation.num_classes) {
    throw DimensionError("train_probe: source and validation disagree on d or C");
  }

  Rng rng(config.seed);
  ProbeParams params = init_probe(source.dim(), source.num_classes());
  ProbeTrainResult result{params, {}};
  result.history.initial_val_loss = probe_cross_entropy(params, validation);
  if (config.max_epochs == 0) return result;

  AdamOptions opts;
  opts.learning_rate = config.learning_rate;
  AdamState adam = AdamState::for_layers<float>(std::span<const DenseLayer>(&params.layer, 1), opts);
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  bool fitted = !config.standardize;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    source.begin_epoch(rng);
    double weighted_loss = 0.0;
    std::size_t rows_seen = 0;
    for (std::size_t b = 0; b < source.batches_per_epoch(); ++b) {
      const LabeledBatch batch = source.next_batch();
      if (batch.features.cols() != params.input_dim()) throw DimensionError("source batch width changed");
      if (!fitted) {
        fit_standardization(params, batch.features);
        fitted = true;
      }
      try {
        auto g = probe_loss_and_gradients<float>(params.layer, prepare(params, batch.features), batch.labels);
        adam_step<float>(std::span<DenseLayer>(&params.layer, 1),
                         std::span<const LayerGradient<float>>(&g.layer, 1), adam);
        weighted_loss += g.loss * static_cast<double>(batch.labels.size());
      } catch (const NumericError& e) {
        throw NumericError("probe training aborted at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b) + ": " + e.what());
      }
      rows_seen += batch.labels.size();
    }
    const double v = probe_cross_entropy(params, validation);
    result.history.epochs.push_back({weighted_loss / static_cast<double>(rows_seen), v});
    if (v < best) {
      best = v;
      result.params = params;
      result.history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

ProbeTrainResult train_probe(const EmbeddingDataset& train, const EmbeddingDataset& validation,
                             const ProbeTrainConfig& config) {
  config.validate();
  DatasetSource source(train, config.batch_size);
  return train_probe(source, validation, config);
}

MatrixD predict_scores(const ProbeParams& params, const Matrix& features) {
  const std::span<const DenseLayer> layers(&params.layer, 1);
  const auto logits = forward<float>(layers, prepare(params, features));
  MatrixD out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    auto p = out.row(i);
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
      p[k] = std::exp(static_cast<double>(z[k]) - top);
      sum += p[k];
    }
    for (auto& v : p) v /= sum;
  }
  return out;
}

double auc_binary(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  if (scores.size() != positive.size()) throw DimensionError("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t start = 0; start < n;) {
    std::size_t stop = start + 1;
    while (stop < n && scores[order[stop]] == scores[order[start]]) ++stop;
    // Ranks are 1-based; a tie block shares the mean of its ranks.
    const double rank = 0.5 * static_cast<double>(start + 1 + stop);
    for (std::size_t i = start; i < stop; ++i) {
      if (positive[order[i]] != 0) {
        positive_rank_sum += rank;
        ++n_pos;
      }
    }
    start = stop;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("auc needs at least one positive and one negative");
  const double np = static_cast<double>(n_pos);
  const double u = positive_rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

nlohmann::json AucReport::to_json() const {
  nlohmann::json per = nlohmann::json::array();
  for (const double v : per_class) per.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
  return {{"macro", macro}, {"per_class", std::move(per)}, {"skipped_classes", skipped_classes}};
}

AucReport auc_macro(const MatrixD& scores, std::span<const std::uint32_t> labels) {
  if (scores.rows() != labels.size()) throw DimensionError("auc: score rows and labels differ");
  AucReport report;
  std::vector<double> column(scores.rows());
  std::vector<std::uint8_t> positive(scores.rows());
  double sum = 0.0;
  std::size_t evaluated = 0;
  for (std::uint32_t c = 0; c < scores.cols(); ++c) {
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < scores.rows(); ++i) {
      column[i] = scores(i, c);
      positive[i] = labels[i] == c ? 1 : 0;
      n_pos += positive[i];
    }
    if (n_pos == 0 || n_pos == scores.rows()) {
      report.per_class.push_back(std::numeric_limits<double>::quiet_NaN());
      report.skipped_classes.push_back(c);
      continue;
    }
    const double auc = auc_binary(column, positive);
    report.per_class.push_back(auc);
    sum += auc;
    ++evaluated;
  }
  if (evaluated == 0) throw DataError("auc: no class has both positives and negatives");
  report.macro = sum / static_cast<double>(evaluated);
  return report;
}

std::vector<std::uint8_t> serialize_probe(const ProbeParams& params, const nlohmann::json& metadata) {
  params.validate();
  LayerContainer c;
  c.magic = make_magic(kProbeMagic);
  c.input_dim = static_cast<std::uint32_t>(params.input_dim());
  c.num_classes = static_cast<std::uint32_t>(params.num_classes());
  c.output_dim = static_cast<std::uint32_t>(params.num_classes());
  c.layers = {params.layer};
  c.metadata = metadata.is_null() ? nlohmann::json::object() : metadata;
  if (params.standardize) {
    c.metadata["standardization"] = {{"shift", params.shift}, {"scale", params.scale}};
  } else {
    c.metadata.erase("standardization");
  }
  return serialize_layers(c);
}

ProbeParams deserialize_probe(std::span<const std::uint8_t> bytes, nlohmann::json* metadata) {
  LayerContainer c = deserialize_layers(bytes, make_magic(kProbeMagic));
  if (c.layers.size() != 1) throw FormatError("probe file must hold exactly one layer");
  ProbeParams p;
  p.layer = std::move(c.layers.front());
  if (p.layer.in_dim() != c.input_dim || p.layer.out_dim() != c.num_classes || c.output_dim != c.num_classes) {
    throw FormatError("probe file header disagrees with its layer shape");
  }
  if (c.metadata.contains("standardization")) {
    try {
      const auto& s = c.metadata.at("standardization");
      p.standardize = true;
      p.shift = s.at("shift").get<std::vector<float>>();
      p.scale = s.at("scale").get<std::vector<float>>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("probe standardization metadata: ") + e.what());
    }
  }
  try {
    p.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("probe file: ") + e.what());
  }
  if (metadata != nullptr) *metadata = std::move(c.metadata);
  return p;
}

void save_probe(const std::filesystem::path& path, const ProbeParams& params, const nlohmann::json& metadata) {
  write_file_bytes(path, serialize_probe(params, metadata));
}

ProbeParams load_probe(const std::filesystem::path& path, nlohmann::json* metadata) {
  return deserialize_probe(read_file_bytes(path), metadata);
}

}  // namespace embanon
