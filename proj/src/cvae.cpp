// SPDX-License-Identifier: Apache-2.0
#include "embanon/cvae.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "embanon/adam.hpp"
#include "embanon/errors.hpp"

namespace embanon {

void CvaeArch::validate() const {
  if (input_dim == 0 || num_classes == 0 || hidden1 == 0 || hidden2 == 0 || latent_dim == 0) {
    throw ConfigError("cvae architecture: every width must be >= 1");
  }
}

nlohmann::json CvaeArch::to_json() const {
  return {{"input_dim", input_dim},
          {"num_classes", num_classes},
          {"hidden1", hidden1},
          {"hidden2", hidden2},
          {"latent_dim", latent_dim}};
}

template <typename T>
void BasicCvaeNet<T>::validate() const {
  arch.validate();
  if (layers.size() != kLayerCount) {
    throw DimensionError("cvae expects 7 layers, got " + std::to_string(layers.size()));
  }
  const std::size_t d = arch.input_dim;
  const std::size_t c = arch.num_classes;
  const std::size_t shapes[kLayerCount][2] = {
      {arch.hidden1, d + c},          {arch.hidden2, arch.hidden1},
      {arch.latent_dim, arch.hidden2}, {arch.latent_dim, arch.hidden2},
      {arch.hidden2, arch.latent_dim + c}, {arch.hidden1, arch.hidden2},
      {d, arch.hidden1}};
  for (std::size_t i = 0; i < kLayerCount; ++i) {
    layers[i].validate();
    if (layers[i].out_dim() != shapes[i][0] || layers[i].in_dim() != shapes[i][1]) {
      throw DimensionError("cvae layer " + std::to_string(i) + " has shape " +
                           std::to_string(layers[i].out_dim()) + "x" +
                           std::to_string(layers[i].in_dim()));
    }
  }
}

CvaeParams init_cvae(const CvaeArch& arch, Rng& rng) {
  arch.validate();
  const std::size_t d = arch.input_dim;
  const std::size_t c = arch.num_classes;
  CvaeParams net{arch, {}};
  net.layers.push_back(glorot_layer<float>(d + c, arch.hidden1, Activation::ReLU, rng));
  net.layers.push_back(glorot_layer<float>(arch.hidden1, arch.hidden2, Activation::ReLU, rng));
  net.layers.push_back(glorot_layer<float>(arch.hidden2, arch.latent_dim, Activation::Identity, rng));
  net.layers.push_back(glorot_layer<float>(arch.hidden2, arch.latent_dim, Activation::Identity, rng));
  net.layers.push_back(glorot_layer<float>(arch.latent_dim + c, arch.hidden2, Activation::ReLU, rng));
  net.layers.push_back(glorot_layer<float>(arch.hidden2, arch.hidden1, Activation::ReLU, rng));
  net.layers.push_back(glorot_layer<float>(arch.hidden1, d, Activation::Identity, rng));
  return net;
}

template <typename T>
Posterior<T> encode(const BasicCvaeNet<T>& net, const BasicMatrix<T>& features,
                    std::span<const std::uint32_t> labels) {
  if (features.cols() != net.arch.input_dim) {
    throw DimensionError("encode: feature width " + std::to_string(features.cols()) +
                         " != " + std::to_string(net.arch.input_dim));
  }
  const auto x = concat_one_hot(features, labels, net.arch.num_classes);
  const auto h = forward<T>(net.encoder_trunk(), x);
  return {forward<T>(net.mu_head(), h), forward<T>(net.logvar_head(), h)};
}

template <typename T>
BasicMatrix<T> reparameterize(const BasicMatrix<T>& mu, const BasicMatrix<T>& logvar,
                              const BasicMatrix<T>& eps) {
  require_same_shape(mu.rows(), mu.cols(), logvar.rows(), logvar.cols(), "reparameterize logvar");
  require_same_shape(mu.rows(), mu.cols(), eps.rows(), eps.cols(), "reparameterize eps");
  BasicMatrix<T> z(mu.rows(), mu.cols());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double m = mu.values()[i];
    const double lv = logvar.values()[i];
    z.values()[i] = static_cast<T>(m + std::exp(0.5 * lv) * static_cast<double>(eps.values()[i]));
  }
  return z;
}

template <typename T>
BasicMatrix<T> reparameterize(const BasicMatrix<T>& mu, const BasicMatrix<T>& logvar, Rng& rng) {
  BasicMatrix<T> eps(mu.rows(), mu.cols());
  for (T& v : eps.values()) v = static_cast<T>(rng.normal());
  return reparameterize(mu, logvar, eps);
}

template <typename T>
BasicMatrix<T> decode_with(std::span<const BasicDenseLayer<T>> decoder, std::uint32_t latent_dim,
                           std::uint32_t num_classes, const BasicMatrix<T>& z,
                           std::span<const std::uint32_t> labels) {
  if (z.cols() != latent_dim) {
    throw DimensionError("decode: latent width " + std::to_string(z.cols()) + " != " +
                         std::to_string(latent_dim));
  }
  return forward<T>(decoder, concat_one_hot(z, labels, num_classes));
}

template <typename T>
BasicMatrix<T> decode(const BasicCvaeNet<T>& net, const BasicMatrix<T>& z,
                      std::span<const std::uint32_t> labels) {
  return decode_with<T>(net.decoder(), net.arch.latent_dim, net.arch.num_classes, z, labels);
}

template <typename T>
ElboTerms elbo_loss(const BasicMatrix<T>& features, const BasicMatrix<T>& reconstruction,
                    const BasicMatrix<T>& mu, const BasicMatrix<T>& logvar, double beta) {
  require_same_shape(features.rows(), features.cols(), reconstruction.rows(), reconstruction.cols(),
                     "elbo reconstruction");
  require_same_shape(mu.rows(), mu.cols(), logvar.rows(), logvar.cols(), "elbo logvar");
  if (mu.rows() != features.rows()) throw DimensionError("elbo: posterior rows differ from batch");
  if (features.rows() == 0) throw DimensionError("elbo: empty batch");

  double sq = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double diff = static_cast<double>(reconstruction.values()[i]) - features.values()[i];
    sq += diff * diff;
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double m = mu.values()[i];
    const double lv = logvar.values()[i];
    kl += std::exp(lv) + m * m - 1.0 - lv;
  }
  ElboTerms t;
  t.recon = sq / static_cast<double>(features.size());
  t.kl = 0.5 * kl / static_cast<double>(features.rows());
  t.total = t.recon + beta * t.kl;
  if (!std::isfinite(t.total) || !std::isfinite(t.recon) || !std::isfinite(t.kl)) {
    throw NumericError("elbo loss is not finite (recon=" + std::to_string(t.recon) +
                       ", kl=" + std::to_string(t.kl) + ")");
  }
  return t;
}

template <typename T>
ElboTerms cvae_loss(const BasicCvaeNet<T>& net, const BasicMatrix<T>& features,
                    std::span<const std::uint32_t> labels, const BasicMatrix<T>& eps, double beta) {
  const auto post = encode(net, features, labels);
  const auto z = reparameterize(post.mu, post.logvar, eps);
  const auto recon = decode(net, z, labels);
  return elbo_loss(features, recon, post.mu, post.logvar, beta);
}

template <typename T>
CvaeGradients<T> cvae_loss_and_gradients(const BasicCvaeNet<T>& net, const BasicMatrix<T>& features,
                                         std::span<const std::uint32_t> labels,
                                         const BasicMatrix<T>& eps, double beta) {
  const auto& arch = net.arch;
  if (features.cols() != arch.input_dim) throw DimensionError("cvae gradients: feature width mismatch");

  const auto x = concat_one_hot(features, labels, arch.num_classes);
  const auto trunk = forward_trace<T>(net.encoder_trunk(), x);
  const auto& h = trunk.output();
  const auto mu_trace = forward_trace<T>(net.mu_head(), h);
  const auto lv_trace = forward_trace<T>(net.logvar_head(), h);
  const auto& mu = mu_trace.output();
  const auto& logvar = lv_trace.output();
  const auto z = reparameterize(mu, logvar, eps);
  const auto dec = forward_trace<T>(net.decoder(), concat_one_hot(z, labels, arch.num_classes));
  const auto& recon = dec.output();

  CvaeGradients<T> out;
  out.loss = elbo_loss(features, recon, mu, logvar, beta);

  const auto batch = static_cast<double>(features.rows());
  const double recon_scale = 2.0 / static_cast<double>(features.size());
  BasicMatrix<T> g_recon(recon.rows(), recon.cols());
  for (std::size_t i = 0; i < recon.size(); ++i) {
    g_recon.values()[i] = static_cast<T>(
        recon_scale * (static_cast<double>(recon.values()[i]) - features.values()[i]));
  }
  auto dec_back = backward<T>(net.decoder(), dec, g_recon);

  BasicMatrix<T> g_mu(mu.rows(), mu.cols());
  BasicMatrix<T> g_lv(mu.rows(), mu.cols());
  for (std::size_t r = 0; r < mu.rows(); ++r) {
    for (std::size_t k = 0; k < mu.cols(); ++k) {
      const double gz = dec_back.input_gradient(r, k);
      const double m = mu(r, k);
      const double lv = logvar(r, k);
      const double sd = std::exp(0.5 * lv);
      g_mu(r, k) = static_cast<T>(gz + beta * m / batch);
      g_lv(r, k) = static_cast<T>(gz * static_cast<double>(eps(r, k)) * 0.5 * sd +
                                  beta * 0.5 * (sd * sd - 1.0) / batch);
    }
  }
  auto mu_back = backward<T>(net.mu_head(), mu_trace, g_mu);
  auto lv_back = backward<T>(net.logvar_head(), lv_trace, g_lv);

  BasicMatrix<T> g_h(h.rows(), h.cols());
  for (std::size_t i = 0; i < g_h.size(); ++i) {
    g_h.values()[i] = static_cast<T>(static_cast<double>(mu_back.input_gradient.values()[i]) +
                                     static_cast<double>(lv_back.input_gradient.values()[i]));
  }
  auto trunk_back = backward<T>(net.encoder_trunk(), trunk, g_h);

  out.layers.reserve(BasicCvaeNet<T>::kLayerCount);
  for (auto& g : trunk_back.layers) out.layers.push_back(std::move(g));
  out.layers.push_back(std::move(mu_back.layers[0]));
  out.layers.push_back(std::move(lv_back.layers[0]));
  for (auto& g : dec_back.layers) out.layers.push_back(std::move(g));
  return out;
}

void CvaeTrainConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("cvae: beta must be >= 0");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("cvae: learning_rate must be >= 0");
  }
  if (batch_size == 0) throw ConfigError("cvae: batch_size must be >= 1");
  if (patience == 0) throw ConfigError("cvae: patience must be >= 1");
  if (hidden1 == 0 || hidden2 == 0 || latent_dim == 0) throw ConfigError("cvae: widths must be >= 1");
}

nlohmann::json CvaeTrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"beta", beta},       {"batch_size", batch_size},
          {"max_epochs", max_epochs},       {"patience", patience}, {"seed", seed},
          {"hidden1", hidden1},             {"hidden2", hidden2}, {"latent_dim", latent_dim}};
}

CvaeTrainConfig CvaeTrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("cvae config must be a JSON object");
  CvaeTrainConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "beta") c.beta = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "max_epochs") c.max_epochs = value.get<std::size_t>();
      else if (key == "patience") c.patience = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "hidden1") c.hidden1 = value.get<std::uint32_t>();
      else if (key == "hidden2") c.hidden2 = value.get<std::uint32_t>();
      else if (key == "latent_dim") c.latent_dim = value.get<std::uint32_t>();
      else throw ConfigError("cvae config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("cvae config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json TrainHistory::to_json() const {
  nlohmann::json epochs_json = nlohmann::json::array();
  for (const auto& e : epochs) {
    epochs_json.push_back({{"train_loss", e.train_loss},
                           {"val_loss", e.val_loss},
                           {"val_recon", e.val_recon},
                           {"val_kl", e.val_kl}});
  }
  return {{"initial_validation",
           {{"total", initial_validation.total},
            {"recon", initial_validation.recon},
            {"kl", initial_validation.kl}}},
          {"epochs", std::move(epochs_json)},
          {"best_epoch", best_epoch}};
}

namespace {

Matrix normal_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  for (float& v : m.values()) v = static_cast<float>(rng.normal());
  return m;
}

}  // namespace

CvaeTrainResult train_cvae(const EmbeddingDataset& train, const EmbeddingDataset& validation,
                           const CvaeTrainConfig& config) {
  config.validate();
  train.validate();
  validation.validate();
  if (train.dim() != validation.dim() || train.num_classes != validation.num_classes) {
    throw DimensionError("train_cvae: train and validation disagree on d or C");
  }

  const CvaeArch arch{static_cast<std::uint32_t>(train.dim()), train.num_classes, config.hidden1,
                      config.hidden2, config.latent_dim};
  Rng rng(config.seed);
  CvaeParams params = init_cvae(arch, rng);

  Rng val_rng(derive_seed(config.seed, "validation-noise"));
  const Matrix val_eps = normal_matrix(validation.size(), arch.latent_dim, val_rng);
  auto val_loss = [&](const CvaeParams& p) {
    return cvae_loss(p, validation.features, validation.labels, val_eps, config.beta);
  };

  CvaeTrainResult result{params, {}};
  result.history.initial_validation = val_loss(params);

  AdamOptions opts;
  opts.learning_rate = config.learning_rate;
  AdamState adam = AdamState::for_layers<float>(params.layers, opts);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    shuffle(std::span<std::size_t>(order), rng);
    double weighted_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, stop - start);
      const auto batch = train.subset(rows);
      const Matrix eps = normal_matrix(batch.size(), arch.latent_dim, rng);
      CvaeGradients<float> g;
      try {
        g = cvae_loss_and_gradients(params, batch.features, batch.labels, eps, config.beta);
        adam_step<float>(params.layers, g.layers, adam);
      } catch (const NumericError& e) {
        throw NumericError("cvae training aborted at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(start / config.batch_size) + ": " + e.what());
      }
      weighted_loss += g.loss.total * static_cast<double>(batch.size());
    }

    ElboTerms v;
    try {
      v = val_loss(params);
    } catch (const NumericError& e) {
      throw NumericError("cvae validation aborted at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    result.history.epochs.push_back(
        {weighted_loss / static_cast<double>(train.size()), v.total, v.recon, v.kl});

    if (v.total < best) {
      best = v.total;
      result.params = params;
      result.history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

#define EMBANON_CVAE_INSTANTIATE(T)                                                              \
  template struct BasicCvaeNet<T>;                                                               \
  template Posterior<T> encode<T>(const BasicCvaeNet<T>&, const BasicMatrix<T>&,                \
                                  std::span<const std::uint32_t>);                               \
  template BasicMatrix<T> reparameterize<T>(const BasicMatrix<T>&, const BasicMatrix<T>&,       \
                                            const BasicMatrix<T>&);                              \
  template BasicMatrix<T> reparameterize<T>(const BasicMatrix<T>&, const BasicMatrix<T>&, Rng&);\
  template BasicMatrix<T> decode<T>(const BasicCvaeNet<T>&, const BasicMatrix<T>&,              \
                                    std::span<const std::uint32_t>);                             \
  template BasicMatrix<T> decode_with<T>(std::span<const BasicDenseLayer<T>>, std::uint32_t,    \
                                         std::uint32_t, const BasicMatrix<T>&,                   \
                                         std::span<const std::uint32_t>);                        \
  template ElboTerms elbo_loss<T>(const BasicMatrix<T>&, const BasicMatrix<T>&,                 \
                                  const BasicMatrix<T>&, const BasicMatrix<T>&, double);         \
  template ElboTerms cvae_loss<T>(const BasicCvaeNet<T>&, const BasicMatrix<T>&,                \
                                  std::span<const std::uint32_t>, const BasicMatrix<T>&, double);\
  template CvaeGradients<T> cvae_loss_and_gradients<T>(const BasicCvaeNet<T>&,                  \
                                                       const BasicMatrix<T>&,                    \
                                                       std::span<const std::uint32_t>,           \
                                                       const BasicMatrix<T>&, double);

EMBANON_CVAE_INSTANTIATE(float)
EMBANON_CVAE_INSTANTIATE(double)

}  // namespace embanon
