// SPDX-License-Identifier: Apache-2.0
#include "embanon/dense.hpp"

#include <cmath>
#include <string>

namespace embanon {

const char* activation_name(Activation a) noexcept {
  switch (a) {
    case Activation::Identity:
      return "identity";
    case Activation::ReLU:
      return "relu";
  }
  return "unknown";
}

template <typename T>
void BasicDenseLayer<T>::validate() const {
  if (bias.size() != weights.rows()) {
    throw DimensionError("dense layer: bias length " + std::to_string(bias.size()) +
                         " != output rows " + std::to_string(weights.rows()));
  }
}

template <typename T>
BasicDenseLayer<T> glorot_layer(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  BasicMatrix<T> w(out, in);
  for (T& v : w.values()) v = static_cast<T>((2.0 * rng.uniform() - 1.0) * limit);
  return {std::move(w), std::vector<T>(out, T{0}), act};
}

namespace {

template <typename T>
void check_input(const BasicDenseLayer<T>& layer, const BasicMatrix<T>& input, std::size_t index) {
  layer.validate();
  if (input.cols() != layer.in_dim()) {
    throw DimensionError("layer " + std::to_string(index) + " expects width " +
                         std::to_string(layer.in_dim()) + ", got " + std::to_string(input.cols()));
  }
}

template <typename T>
BasicMatrix<T> apply_layer(const BasicDenseLayer<T>& layer, const BasicMatrix<T>& input) {
  const std::size_t batch = input.rows();
  const std::size_t in = layer.in_dim();
  const std::size_t out = layer.out_dim();
  BasicMatrix<T> result(batch, out);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* x = input.row(b).data();
    T* y = result.row(b).data();
    for (std::size_t o = 0; o < out; ++o) {
      const T* w = layer.weights.row(o).data();
      double acc = 0.0;
      for (std::size_t k = 0; k < in; ++k) {
        acc += static_cast<double>(w[k]) * static_cast<double>(x[k]);
      }
      acc += static_cast<double>(layer.bias[o]);
      T v = static_cast<T>(acc);
      if (layer.activation == Activation::ReLU && !(v > T{0})) v = T{0};
      y[o] = v;
    }
  }
  return result;
}

}  // namespace

template <typename T>
BasicMatrix<T> forward(LayerSpan<T> layers, const BasicMatrix<T>& input) {
  if (layers.empty()) return input;
  BasicMatrix<T> current;
  const BasicMatrix<T>* x = &input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    check_input(layers[i], *x, i);
    current = apply_layer(layers[i], *x);
    x = &current;
  }
  return current;
}

template <typename T>
ForwardTrace<T> forward_trace(LayerSpan<T> layers, const BasicMatrix<T>& input) {
  ForwardTrace<T> trace;
  trace.activations.reserve(layers.size() + 1);
  trace.activations.push_back(input);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    check_input(layers[i], trace.activations.back(), i);
    trace.activations.push_back(apply_layer(layers[i], trace.activations.back()));
  }
  return trace;
}

template <typename T>
BackwardResult<T> backward(LayerSpan<T> layers, const ForwardTrace<T>& trace,
                           const BasicMatrix<T>& upstream) {
  if (trace.activations.size() != layers.size() + 1) {
    throw DimensionError("backward: trace does not match layer count");
  }
  const BasicMatrix<T>& out = trace.output();
  require_same_shape(upstream.rows(), upstream.cols(), out.rows(), out.cols(),
                     "backward upstream gradient");

  BackwardResult<T> result;
  result.layers.resize(layers.size());
  BasicMatrix<T> grad = upstream;

  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& layer = layers[li];
    const BasicMatrix<T>& x = trace.activations[li];
    const BasicMatrix<T>& y = trace.activations[li + 1];
    const std::size_t batch = x.rows();
    const std::size_t in = layer.in_dim();
    const std::size_t out_dim = layer.out_dim();

    if (layer.activation == Activation::ReLU) {
      for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!(y.values()[i] > T{0})) grad.values()[i] = T{0};
      }
    }

    std::vector<double> dw(out_dim * in, 0.0);
    std::vector<double> db(out_dim, 0.0);
    std::vector<double> dx(batch * in, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      const T* xr = x.row(b).data();
      const T* gr = grad.row(b).data();
      double* dxr = dx.data() + b * in;
      for (std::size_t o = 0; o < out_dim; ++o) {
        const double g = static_cast<double>(gr[o]);
        if (g == 0.0) continue;
        db[o] += g;
        double* dwr = dw.data() + o * in;
        const T* wr = layer.weights.row(o).data();
        for (std::size_t k = 0; k < in; ++k) {
          dwr[k] += g * static_cast<double>(xr[k]);
          dxr[k] += g * static_cast<double>(wr[k]);
        }
      }
    }

    auto& lg = result.layers[li];
    lg.weights = BasicMatrix<T>(out_dim, in, std::vector<T>(dw.begin(), dw.end()));
    lg.bias.assign(db.begin(), db.end());
    grad = BasicMatrix<T>(batch, in, std::vector<T>(dx.begin(), dx.end()));
  }
  result.input_gradient = std::move(grad);
  return result;
}

template <typename T>
BackwardResult<T> backward(LayerSpan<T> layers, const BasicMatrix<T>& input,
                           const BasicMatrix<T>& upstream) {
  return backward<T>(layers, forward_trace<T>(layers, input), upstream);
}

template <typename T>
std::vector<LayerGradient<T>> zero_gradients(std::span<const BasicDenseLayer<T>> layers) {
  std::vector<LayerGradient<T>> out;
  out.reserve(layers.size());
  for (const auto& l : layers) {
    out.push_back({BasicMatrix<T>(l.out_dim(), l.in_dim()), std::vector<T>(l.out_dim(), T{0})});
  }
  return out;
}

template <typename T>
bool all_finite(std::span<const LayerGradient<T>> grads) {
  for (const auto& g : grads) {
    if (!g.weights.all_finite()) return false;
    for (const T v : g.bias) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

template <typename T>
BasicMatrix<T> hconcat(const BasicMatrix<T>& left, const BasicMatrix<T>& right) {
  if (left.rows() != right.rows()) {
    throw DimensionError("hconcat: row counts " + std::to_string(left.rows()) + " vs " +
                         std::to_string(right.rows()));
  }
  BasicMatrix<T> out(left.rows(), left.cols() + right.cols());
  for (std::size_t r = 0; r < left.rows(); ++r) {
    auto dst = out.row(r);
    std::copy(left.row(r).begin(), left.row(r).end(), dst.begin());
    std::copy(right.row(r).begin(), right.row(r).end(), dst.begin() + left.cols());
  }
  return out;
}

template <typename T>
BasicMatrix<T> concat_one_hot(const BasicMatrix<T>& features, std::span<const std::uint32_t> labels,
                              std::uint32_t num_classes) {
  if (labels.size() != features.rows()) {
    throw DimensionError("one-hot: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(features.rows()) + " rows");
  }
  const std::size_t d = features.cols();
  BasicMatrix<T> out(features.rows(), d + num_classes);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    if (labels[r] >= num_classes) {
      throw DataError("label " + std::to_string(labels[r]) + " out of range for " +
                      std::to_string(num_classes) + " classes");
    }
    auto dst = out.row(r);
    std::copy(features.row(r).begin(), features.row(r).end(), dst.begin());
    dst[d + labels[r]] = T{1};
  }
  return out;
}

#define EMBANON_DENSE_INSTANTIATE(T)                                                             \
  template struct BasicDenseLayer<T>;                                                            \
  template BasicDenseLayer<T> glorot_layer<T>(std::size_t, std::size_t, Activation, Rng&);     \
  template BasicMatrix<T> forward<T>(LayerSpan<T>, const BasicMatrix<T>&);                       \
  template ForwardTrace<T> forward_trace<T>(LayerSpan<T>, const BasicMatrix<T>&);                \
  template BackwardResult<T> backward<T>(LayerSpan<T>, const ForwardTrace<T>&,                   \
                                         const BasicMatrix<T>&);                                 \
  template BackwardResult<T> backward<T>(LayerSpan<T>, const BasicMatrix<T>&,                    \
                                         const BasicMatrix<T>&);                                 \
  template std::vector<LayerGradient<T>> zero_gradients<T>(std::span<const BasicDenseLayer<T>>); \
  template bool all_finite<T>(std::span<const LayerGradient<T>>);                                \
  template BasicMatrix<T> hconcat<T>(const BasicMatrix<T>&, const BasicMatrix<T>&);             \
  template BasicMatrix<T> concat_one_hot<T>(const BasicMatrix<T>&,                              \
                                            std::span<const std::uint32_t>, std::uint32_t);

EMBANON_DENSE_INSTANTIATE(float)
EMBANON_DENSE_INSTANTIATE(double)

}  // namespace embanon
