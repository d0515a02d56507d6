// SPDX-License-Identifier: Apache-2.0
#include "embanon/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "embanon/errors.hpp"

namespace embanon {

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw ConfigError("uniform_index: empty range");
  // Largest multiple of n representable; draws at or above it are rejected.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

double Rng::normal() {
  if (cached_normal_) {
    const double v = *cached_normal_;
    cached_normal_.reset();
    return v;
  }
  const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return splitmix64(splitmix64(base) ^ (stream * 0xD1B54A32D192ED03ULL + 1));
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  // FNV-1a over the tag, then mixed with the base.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return derive_seed(base, h);
}

std::vector<double> sample_standard_normal(Rng& rng, std::size_t n) {
  std::vector<double> out(n);
  for (auto& v : out) v = rng.normal();
  return out;
}

std::uint32_t sample_categorical(Rng& rng, std::span<const double> probabilities) {
  if (probabilities.empty()) throw ConfigError("sample_categorical: empty distribution");
  const double u = rng.uniform();
  double cumulative = 0.0;
  std::uint32_t last_nonzero = 0;
  for (std::size_t c = 0; c < probabilities.size(); ++c) {
    if (probabilities[c] <= 0.0) continue;
    last_nonzero = static_cast<std::uint32_t>(c);
    cumulative += probabilities[c];
    if (u < cumulative) return static_cast<std::uint32_t>(c);
  }
  // Rounding left the cumulative sum a hair below 1.
  return last_nonzero;
}

}  // namespace embanon
