// SPDX-License-Identifier: Apache-2.0
// Independent reference computations and fixtures shared by the tests.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "embanon/cvae.hpp"
#include "embanon/dataset.hpp"
#include "embanon/decoder.hpp"
#include "embanon/dense.hpp"
#include "embanon/probe.hpp"
#include "embanon/sampler.hpp"

namespace oracle {

using embanon::EmbeddingDataset;
using embanon::Matrix;

inline double uniform(std::mt19937_64& g, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(g);
}

inline std::size_t uniform_int(std::mt19937_64& g, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(g);
}

inline Matrix random_matrix(std::mt19937_64& g, std::size_t rows, std::size_t cols, double lo = -1.0,
                            double hi = 1.0) {
  Matrix m(rows, cols);
  for (auto& v : m.values()) v = static_cast<float>(uniform(g, lo, hi));
  return m;
}

/// Random labels where every class in [0, C) appears at least once when n >= C.
inline EmbeddingDataset random_dataset(std::mt19937_64& g, std::size_t n, std::size_t d, std::uint32_t classes,
                                       double spread = 3.0) {
  EmbeddingDataset ds;
  ds.features = random_matrix(g, n, d, -spread, spread);
  ds.num_classes = classes;
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = i < classes ? static_cast<std::uint32_t>(i)
                               : static_cast<std::uint32_t>(uniform_int(g, 0, classes - 1));
  }
  std::shuffle(ds.labels.begin(), ds.labels.end(), g);
  return ds;
}

inline double euclid(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (double(a[k]) - double(b[k])) * (double(a[k]) - double(b[k]));
  return std::sqrt(s);
}

/// Direct transcription of mean_j min_i ||a_j - f_i||.
inline double brute_nn_distance(const Matrix& a, const Matrix& f) {
  double total = 0.0;
  for (std::size_t j = 0; j < a.rows(); ++j) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < f.rows(); ++i) best = std::min(best, euclid(a.row(j), f.row(i)));
    total += best;
  }
  return total / static_cast<double>(a.rows());
}

inline double brute_dispersion(const Matrix& x) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = i + 1; j < x.rows(); ++j) total += euclid(x.row(i), x.row(j));
  }
  return total;
}

/// Greedy grouping replayed naively: anchor = lowest unassigned index, members
/// = its k-1 nearest unassigned rows by a stable sort on distance.
inline std::vector<std::vector<std::size_t>> replay_greedy_groups(const Matrix& x, std::size_t k) {
  std::vector<bool> taken(x.rows(), false);
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t anchor = 0; anchor < x.rows(); ++anchor) {
    if (taken[anchor]) continue;
    std::vector<std::size_t> others;
    for (std::size_t j = anchor + 1; j < x.rows(); ++j) {
      if (!taken[j]) others.push_back(j);
    }
    std::stable_sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
      double da = 0.0;
      double db = 0.0;
      for (std::size_t c = 0; c < x.cols(); ++c) {
        da += (double(x(anchor, c)) - x(a, c)) * (double(x(anchor, c)) - x(a, c));
        db += (double(x(anchor, c)) - x(b, c)) * (double(x(anchor, c)) - x(b, c));
      }
      return da < db;
    });
    std::vector<std::size_t> group{anchor};
    for (std::size_t i = 0; i < others.size() && group.size() < k; ++i) group.push_back(others[i]);
    for (const auto i : group) taken[i] = true;
    groups.push_back(std::move(group));
  }
  return groups;
}

/// Every row replaced by the double-accumulated mean of its group.
inline Matrix group_means(const Matrix& x, const std::vector<std::vector<std::size_t>>& groups) {
  Matrix out(x.rows(), x.cols());
  for (const auto& g : groups) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      double s = 0.0;
      for (const auto i : g) s += x(i, c);
      for (const auto i : g) out(i, c) = static_cast<float>(s / static_cast<double>(g.size()));
    }
  }
  return out;
}

/// Fraction of (positive, negative) pairs ranked correctly, ties worth one half.
inline double brute_auc(std::span<const double> scores, std::span<const std::uint8_t> positive) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (positive[i] == 0) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (positive[j] != 0) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

/// Straight-line MLP in double: y = act(W x + b), layer by layer.
template <typename T>
std::vector<double> mlp_row(std::span<const embanon::BasicDenseLayer<T>> layers, std::vector<double> x) {
  for (const auto& l : layers) {
    std::vector<double> y(l.out_dim());
    for (std::size_t o = 0; o < l.out_dim(); ++o) {
      double s = l.bias[o];
      for (std::size_t k = 0; k < l.in_dim(); ++k) s += double(l.weights(o, k)) * x[k];
      y[o] = l.activation == embanon::Activation::ReLU ? std::max(0.0, s) : s;
    }
    x = std::move(y);
  }
  return x;
}

/// Generator built directly on std::mt19937_64 without the library's Rng,
/// following the documented draw recipes.
class ReferenceStream {
 public:
  explicit ReferenceStream(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (cached_) {
      const double v = *cached_;
      cached_.reset();
      return v;
    }
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    cached_ = r * std::sin(2.0 * std::numbers::pi * u2);
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint32_t categorical(std::span<const double> p) {
    const double u = uniform();
    double c = 0.0;
    std::uint32_t last = 0;
    for (std::uint32_t k = 0; k < p.size(); ++k) {
      if (p[k] <= 0.0) continue;
      last = k;
      c += p[k];
      if (u < c) return k;
    }
    return last;
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> cached_;
};

/// Decoder with random weights in [-scale, scale] for the given shape.
inline embanon::CvaeDecoder random_decoder(std::mt19937_64& g, std::uint32_t latent, std::uint32_t classes,
                                           std::uint32_t out, std::uint32_t h1 = 24, std::uint32_t h2 = 12,
                                           double scale = 0.5) {
  embanon::CvaeDecoder dec;
  dec.latent_dim = latent;
  dec.num_classes = classes;
  dec.output_dim = out;
  const std::uint32_t dims[] = {latent + classes, h2, h1, out};
  for (int i = 0; i < 3; ++i) {
    embanon::DenseLayer l{random_matrix(g, dims[i + 1], dims[i], -scale, scale), {},
                          i < 2 ? embanon::Activation::ReLU : embanon::Activation::Identity};
    l.bias.resize(dims[i + 1]);
    for (auto& b : l.bias) b = static_cast<float>(uniform(g, -scale, scale));
    dec.layers.push_back(std::move(l));
  }
  dec.metadata = {{"class_distribution", std::vector<double>(classes, 1.0 / classes)}, {"train_size", 100}};
  return dec;
}

/// Float layer evaluation written out per element: double accumulator from
/// zero, products in index order, bias last, one rounding to float, then ReLU.
inline std::vector<float> float_layer_row(const embanon::DenseLayer& l, const std::vector<float>& x) {
  std::vector<float> y(l.out_dim());
  for (std::size_t o = 0; o < l.out_dim(); ++o) {
    double acc = 0.0;
    for (std::size_t k = 0; k < l.in_dim(); ++k) acc += static_cast<double>(l.weights(o, k)) * x[k];
    acc += static_cast<double>(l.bias[o]);
    const auto v = static_cast<float>(acc);
    y[o] = l.activation == embanon::Activation::ReLU ? (v > 0.0F ? v : 0.0F) : v;
  }
  return y;
}

struct ReferenceSample {
  Matrix features;
  std::vector<std::uint32_t> labels;
};

/// The generation loop, one sample at a time: draw a class, draw a latent
/// vector of scaled standard normals, decode [z | one_hot(class)].
inline ReferenceSample reference_generate(const embanon::CvaeDecoder& dec, std::span<const double> class_probs,
                                          std::size_t n, double sampling_variance, std::uint64_t seed) {
  ReferenceStream rng(seed);
  const double scale = std::sqrt(sampling_variance);
  ReferenceSample out{Matrix(n, dec.output_dim), std::vector<std::uint32_t>(n)};
  for (std::size_t j = 0; j < n; ++j) {
    const std::uint32_t y = rng.categorical(class_probs);
    std::vector<float> h(dec.latent_dim + dec.num_classes, 0.0F);
    for (std::uint32_t k = 0; k < dec.latent_dim; ++k) h[k] = static_cast<float>(scale * rng.normal());
    h[dec.latent_dim + y] = 1.0F;
    for (const auto& l : dec.layers) h = float_layer_row(l, h);
    out.labels[j] = y;
    std::copy(h.begin(), h.end(), out.features.row(j).begin());
  }
  return out;
}

/// On/off state of every ReLU unit while evaluating a layer stack.
template <typename T>
std::vector<std::uint8_t> relu_pattern(std::span<const embanon::BasicDenseLayer<T>> layers,
                                       const embanon::BasicMatrix<T>& input) {
  std::vector<std::uint8_t> out;
  const auto trace = embanon::forward_trace<T>(layers, input);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].activation != embanon::Activation::ReLU) continue;
    for (const T v : trace.activations[i + 1].values()) out.push_back(v > T{0} ? 1 : 0);
  }
  return out;
}

/// ReLU pattern of the whole encode -> reparameterize -> decode graph for fixed noise.
inline std::vector<std::uint8_t> cvae_pattern(const embanon::BasicCvaeNet<double>& net, const embanon::MatrixD& f,
                                              std::span<const std::uint32_t> labels, const embanon::MatrixD& eps) {
  const auto x = embanon::concat_one_hot(f, labels, net.arch.num_classes);
  auto out = relu_pattern<double>(net.encoder_trunk(), x);
  const auto post = embanon::encode(net, f, labels);
  const auto z = embanon::reparameterize(post.mu, post.logvar, eps);
  const auto dec = relu_pattern<double>(net.decoder(), embanon::concat_one_hot(z, labels, net.arch.num_classes));
  out.insert(out.end(), dec.begin(), dec.end());
  return out;
}

/// |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor keeps
/// partials that are zero up to rounding from dividing by nothing.
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct FiniteDifferenceStats {
  std::size_t checked = 0;
  std::size_t skipped_at_kink = 0;
  double max_relative_error = 0.0;
};

/// Central differences over every entry of `params`, compared with `analytic`
/// (same layout). `loss()` evaluates at the current parameters; `pattern()`
/// reports the ReLU states, and an entry whose +h/-h evaluations change any
/// state is skipped because the loss is not differentiable across it.
template <typename Loss, typename Pattern>
void finite_difference_check(std::span<double> params, std::span<const double> analytic, double h, Loss&& loss,
                             Pattern&& pattern, FiniteDifferenceStats& stats) {
  const auto base = pattern();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double v = params[i];
    params[i] = v + h;
    const double up = loss();
    const bool same_up = pattern() == base;
    params[i] = v - h;
    const double down = loss();
    const bool same_down = pattern() == base;
    params[i] = v;
    if (!same_up || !same_down) {
      ++stats.skipped_at_kink;
      continue;
    }
    const double numeric = (up - down) / (2.0 * h);
    stats.max_relative_error = std::max(stats.max_relative_error, relative_error(analytic[i], numeric));
    ++stats.checked;
  }
}

/// CVAE in double with uniform(-scale, scale) weights and small random biases.
inline embanon::BasicCvaeNet<double> random_cvae(std::mt19937_64& g, std::uint32_t d, std::uint32_t classes,
                                                 std::uint32_t h1, std::uint32_t h2, std::uint32_t latent,
                                                 double scale = 0.8) {
  const embanon::CvaeArch arch{d, classes, h1, h2, latent};
  const std::uint32_t shapes[7][2] = {{d + classes, h1}, {h1, h2},     {h2, latent}, {h2, latent},
                                      {latent + classes, h2}, {h2, h1}, {h1, d}};
  const bool relu[7] = {true, true, false, false, true, true, false};
  embanon::BasicCvaeNet<double> net{arch, {}};
  for (int i = 0; i < 7; ++i) {
    embanon::BasicDenseLayer<double> l{embanon::MatrixD(shapes[i][1], shapes[i][0]),
                                       std::vector<double>(shapes[i][1]),
                                       relu[i] ? embanon::Activation::ReLU : embanon::Activation::Identity};
    for (auto& w : l.weights.values()) w = uniform(g, -scale, scale);
    for (auto& b : l.bias) b = uniform(g, -0.3, 0.3);
    net.layers.push_back(std::move(l));
  }
  return net;
}

/// Monte Carlo KL(N(mu, exp(logvar)) || N(0, I)) for one row: the mean of
/// log q(z) - log p(z) over `samples` draws of z, taken in antithetic pairs.
inline double kl_monte_carlo(std::span<const double> mu, std::span<const double> logvar, std::size_t samples,
                             std::mt19937_64& g) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> eps(mu.size());
  double total = 0.0;
  for (std::size_t s = 0; s < samples / 2; ++s) {
    for (auto& e : eps) e = normal(g);
    for (const double sign : {1.0, -1.0}) {
      double log_ratio = 0.0;
      for (std::size_t k = 0; k < mu.size(); ++k) {
        const double sd = std::exp(0.5 * logvar[k]);
        const double z = mu[k] + sd * sign * eps[k];
        const double log_q = -0.5 * eps[k] * eps[k] - std::log(sd);
        const double log_p = -0.5 * z * z;
        log_ratio += log_q - log_p;
      }
      total += log_ratio;
    }
  }
  return total / static_cast<double>(2 * (samples / 2));
}

/// Bit-at-a-time CRC-64/XZ: reflected polynomial 0xC96C5795D7870F42, init and xorout all ones.
inline std::uint64_t crc64_bitwise(std::span<const std::uint8_t> bytes) {
  std::uint64_t crc = ~std::uint64_t{0};
  for (const std::uint8_t b : bytes) {
    crc ^= b;
    for (int k = 0; k < 8; ++k) crc = (crc & 1U) != 0 ? (crc >> 1) ^ 0xC96C5795D7870F42ULL : crc >> 1;
  }
  return ~crc;
}

/// Hand-rolled little-endian byte assembly for golden files.
struct LeBytes {
  std::vector<std::uint8_t> bytes;

  LeBytes& put(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) bytes.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFU));
    return *this;
  }
  LeBytes& u8(std::uint8_t v) { return put(v, 1); }
  LeBytes& u32(std::uint32_t v) { return put(v, 4); }
  LeBytes& u64(std::uint64_t v) { return put(v, 8); }
  LeBytes& f32(float v) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, &v, 4);
    return put(bits, 4);
  }
  LeBytes& text(const std::string& s) {
    bytes.insert(bytes.end(), s.begin(), s.end());
    return *this;
  }
  LeBytes& seal() { return u64(crc64_bitwise(bytes)); }
};

/// Central differences over every CVAE weight and bias, noise held fixed.
inline void check_cvae_gradients(embanon::BasicCvaeNet<double>& net, const embanon::MatrixD& f,
                                 std::span<const std::uint32_t> labels, const embanon::MatrixD& eps, double beta,
                                 FiniteDifferenceStats& stats, double h = 1e-5) {
  const auto analytic = embanon::cvae_loss_and_gradients(net, f, labels, eps, beta);
  auto loss = [&] { return embanon::cvae_loss(net, f, labels, eps, beta).total; };
  auto pattern = [&] { return cvae_pattern(net, f, labels, eps); };
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    finite_difference_check(net.layers[i].weights.values(), analytic.layers[i].weights.values(), h, loss, pattern,
                            stats);
    finite_difference_check(std::span<double>(net.layers[i].bias), std::span<const double>(analytic.layers[i].bias),
                            h, loss, pattern, stats);
  }
}

/// Central differences over the probe's weights and bias.
inline void check_probe_gradients(embanon::BasicDenseLayer<double>& layer, const embanon::MatrixD& x,
                                  std::span<const std::uint32_t> labels, FiniteDifferenceStats& stats,
                                  double h = 1e-5) {
  const auto analytic = embanon::probe_loss_and_gradients<double>(layer, x, labels);
  auto loss = [&] { return embanon::probe_loss_and_gradients<double>(layer, x, labels).loss; };
  auto pattern = [] { return std::vector<std::uint8_t>{}; };
  finite_difference_check(layer.weights.values(), analytic.layer.weights.values(), h, loss, pattern, stats);
  finite_difference_check(std::span<double>(layer.bias), std::span<const double>(analytic.layer.bias), h, loss,
                          pattern, stats);
}

/// Wraps a stream and records every batch it hands to the trainer.
class RecordingSource final : public embanon::BatchSource {
 public:
  RecordingSource(embanon::SampleStream& stream, std::size_t reference_size) : inner_(stream, reference_size) {}

  std::size_t dim() const override { return inner_.dim(); }
  std::uint32_t num_classes() const override { return inner_.num_classes(); }
  std::size_t batches_per_epoch() const override { return inner_.batches_per_epoch(); }
  void begin_epoch(embanon::Rng& rng) override { inner_.begin_epoch(rng); }
  embanon::LabeledBatch next_batch() override {
    auto b = inner_.next_batch();
    seen.push_back(b);
    return b;
  }

  std::vector<embanon::LabeledBatch> seen;

 private:
  embanon::StreamSource inner_;
};

/// Fresh empty directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("embanon-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace oracle
