// SPDX-License-Identifier: Apache-2.0
#include "embanon/adam.hpp"

#include <cmath>
#include <string>

namespace embanon {

template <typename T>
void AdamState::step(std::span<const std::span<T>> params,
                     std::span<const std::span<const T>> grads) {
  if (params.size() != grads.size() || params.size() != first_moment_.size()) {
    throw DimensionError("adam: " + std::to_string(params.size()) + " parameter tensors, " +
                         std::to_string(grads.size()) + " gradients, " +
                         std::to_string(first_moment_.size()) + " state slots");
  }
  for (std::size_t s = 0; s < params.size(); ++s) {
    if (params[s].size() != grads[s].size() || params[s].size() != first_moment_[s].size()) {
      throw DimensionError("adam: slot " + std::to_string(s) + " shape mismatch");
    }
    for (const T g : grads[s]) {
      if (!std::isfinite(g)) {
        throw NumericError("adam: non-finite gradient in slot " + std::to_string(s));
      }
    }
  }

  ++step_count_;
  const auto t = static_cast<double>(step_count_);
  const double correction1 = 1.0 - std::pow(options_.beta1, t);
  const double correction2 = 1.0 - std::pow(options_.beta2, t);

  for (std::size_t s = 0; s < params.size(); ++s) {
    auto& m = first_moment_[s];
    auto& v = second_moment_[s];
    for (std::size_t i = 0; i < params[s].size(); ++i) {
      const auto g = static_cast<double>(grads[s][i]);
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g;
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      const double update = options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
      params[s][i] = static_cast<T>(static_cast<double>(params[s][i]) - update);
    }
  }
}

template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState& state) {
  const std::span<T> p[] = {params};
  const std::span<const T> g[] = {grads};
  state.step<T>(p, g);
}

template <typename T>
void adam_step(std::span<BasicDenseLayer<T>> layers, std::span<const LayerGradient<T>> grads,
               AdamState& state) {
  if (layers.size() != grads.size()) {
    throw DimensionError("adam: layer/gradient count mismatch");
  }
  std::vector<std::span<T>> p;
  std::vector<std::span<const T>> g;
  p.reserve(2 * layers.size());
  g.reserve(2 * layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    p.emplace_back(layers[i].weights.values());
    p.emplace_back(layers[i].bias);
    g.emplace_back(grads[i].weights.values());
    g.emplace_back(grads[i].bias);
  }
  state.step<T>(p, g);
}

template void AdamState::step<float>(std::span<const std::span<float>>,
                                     std::span<const std::span<const float>>);
template void AdamState::step<double>(std::span<const std::span<double>>,
                                      std::span<const std::span<const double>>);
template void adam_step<float>(std::span<float>, std::span<const float>, AdamState&);
template void adam_step<double>(std::span<double>, std::span<const double>, AdamState&);
template void adam_step<float>(std::span<BasicDenseLayer<float>>,
                               std::span<const LayerGradient<float>>, AdamState&);
template void adam_step<double>(std::span<BasicDenseLayer<double>>,
                                std::span<const LayerGradient<double>>, AdamState&);

}  // namespace embanon
