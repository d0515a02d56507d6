// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <type_traits>
#include <vector>

#include "embanon/matrix.hpp"
#include "embanon/rng.hpp"

namespace embanon {

enum class Activation : std::uint8_t { Identity = 0, ReLU = 1 };

const char* activation_name(Activation a) noexcept;

/// Fully connected layer computing `activation(x * W^T + b)` for each row x.
///
/// Arithmetic convention (relied upon by bit-exact replay tests): each output
/// element is a double accumulator started at zero, incremented by
/// `double(W(o,k)) * double(x(k))` for k = 0..in-1 in order, then `double(b(o))`
/// is added and the sum is rounded to T before the activation is applied.
template <typename T>
struct BasicDenseLayer {
  BasicMatrix<T> weights;  // out x in
  std::vector<T> bias;     // out
  Activation activation = Activation::Identity;

  std::size_t in_dim() const noexcept { return weights.cols(); }
  std::size_t out_dim() const noexcept { return weights.rows(); }
  std::size_t parameter_count() const noexcept { return weights.size() + bias.size(); }

  /// Throws DimensionError when bias length differs from the row count.
  void validate() const;

  template <typename U>
  BasicDenseLayer<U> cast() const {
    return {weights.template cast<U>(), std::vector<U>(bias.begin(), bias.end()), activation};
  }

  friend bool operator==(const BasicDenseLayer&, const BasicDenseLayer&) = default;
};

using DenseLayer = BasicDenseLayer<float>;

template <typename T>
struct LayerGradient {
  BasicMatrix<T> weights;
  std::vector<T> bias;
};

/// Activations recorded by a forward pass: `activations[0]` is the input and
/// `activations[i + 1]` is the output of layer i.
template <typename T>
struct ForwardTrace {
  std::vector<BasicMatrix<T>> activations;

  const BasicMatrix<T>& output() const { return activations.back(); }
};

template <typename T>
struct BackwardResult {
  std::vector<LayerGradient<T>> layers;
  BasicMatrix<T> input_gradient;
};

/// Layer with uniform(-a, a) weights, a = sqrt(6 / (fan_in + fan_out)), and zero bias.
template <typename T>
BasicDenseLayer<T> glorot_layer(std::size_t in, std::size_t out, Activation act, Rng& rng);

// Layer spans are non-deduced so that vectors convert implicitly; T comes from the matrix.
template <typename T>
using LayerSpan = std::type_identity_t<std::span<const BasicDenseLayer<T>>>;

template <typename T>
BasicMatrix<T> forward(LayerSpan<T> layers, const BasicMatrix<T>& input);

template <typename T>
ForwardTrace<T> forward_trace(LayerSpan<T> layers,
                              const BasicMatrix<T>& input);

/// Gradients of `sum(upstream .* forward(layers, input))` with respect to every
/// weight, bias and input entry.
template <typename T>
BackwardResult<T> backward(LayerSpan<T> layers,
                           const ForwardTrace<T>& trace, const BasicMatrix<T>& upstream);

template <typename T>
BackwardResult<T> backward(LayerSpan<T> layers,
                           const BasicMatrix<T>& input, const BasicMatrix<T>& upstream);

/// Zero-valued gradients shaped like `layers`.
template <typename T>
std::vector<LayerGradient<T>> zero_gradients(std::span<const BasicDenseLayer<T>> layers);

template <typename T>
bool all_finite(std::span<const LayerGradient<T>> grads);

/// Row-wise concatenation [left | right].
template <typename T>
BasicMatrix<T> hconcat(const BasicMatrix<T>& left, const BasicMatrix<T>& right);

/// Row-wise concatenation of features with the one-hot encoding of `labels`.
/// Throws DataError for a label >= num_classes.
template <typename T>
BasicMatrix<T> concat_one_hot(const BasicMatrix<T>& features, std::span<const std::uint32_t> labels,
                              std::uint32_t num_classes);

// Definitions live in dense.cpp, instantiated for float and double.

}  // namespace embanon
