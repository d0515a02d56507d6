// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace embanon {

/// Seedable generator with a platform-independent output stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Everything built on top of it (uniform doubles, bounded integers,
/// Box-Muller normals) is implemented here rather than through the
/// <random> distributions, whose algorithms are implementation-defined.
class Rng {
 public:
  static constexpr std::string_view algorithm_id = "mt19937_64+box-muller/v1";

  explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer on [0, n). Rejection sampling, so no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal draw. Box-Muller produces pairs; the second value is cached.
  double normal();

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  std::optional<double> cached_normal_;
};

/// Mixes a base seed with a stream tag (SplitMix64 finalizer) so that
/// independent consumers of one experiment seed get decorrelated streams.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

std::vector<double> sample_standard_normal(Rng& rng, std::size_t n);

/// Inverse-CDF draw from a categorical distribution given by `probabilities`.
std::uint32_t sample_categorical(Rng& rng, std::span<const double> probabilities);

/// Fisher-Yates shuffle driven by Rng::uniform_index.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_index(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace embanon
