// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "embanon/dense.hpp"

namespace embanon {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam. Moments are kept in double, one slot per parameter
/// tensor (for layers: weights then bias, layer by layer).
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(AdamOptions options) : options_(options) {}

  template <typename T>
  static AdamState for_layers(std::span<const BasicDenseLayer<T>> layers, AdamOptions options) {
    AdamState s(options);
    for (const auto& l : layers) {
      s.add_slot(l.weights.size());
      s.add_slot(l.bias.size());
    }
    return s;
  }

  void add_slot(std::size_t size) {
    first_moment_.emplace_back(size, 0.0);
    second_moment_.emplace_back(size, 0.0);
  }

  const AdamOptions& options() const noexcept { return options_; }
  std::uint64_t step_count() const noexcept { return step_count_; }
  std::size_t slot_count() const noexcept { return first_moment_.size(); }
  std::span<const double> first_moment(std::size_t slot) const { return first_moment_.at(slot); }
  std::span<const double> second_moment(std::size_t slot) const { return second_moment_.at(slot); }

  /// Applies one update to a list of parameter tensors. Throws NumericError
  /// (leaving parameters and state untouched) when any gradient is non-finite.
  template <typename T>
  void step(std::span<const std::span<T>> params, std::span<const std::span<const T>> grads);

 private:
  AdamOptions options_;
  std::vector<std::vector<double>> first_moment_;
  std::vector<std::vector<double>> second_moment_;
  std::uint64_t step_count_ = 0;
};

/// One Adam update of a single parameter tensor; `state` must have one slot.
template <typename T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState& state);

/// One Adam update of every weight and bias in `layers`.
template <typename T>
void adam_step(std::span<BasicDenseLayer<T>> layers, std::span<const LayerGradient<T>> grads,
               AdamState& state);

}  // namespace embanon
