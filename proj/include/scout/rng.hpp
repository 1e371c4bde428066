// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

#include "scout/tensor.hpp"

namespace scout {

/// Seeded generator with named sub-streams.
///
/// Only integer-exact pieces of <random> are used (mt19937_64 is fully
/// specified by the standard); uniform and normal variates are derived here so
/// results do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(splitmix(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Independent stream keyed by name, e.g. one per parameter tensor.
  Rng stream(std::string_view name) const { return Rng(splitmix(seed_ ^ fnv1a(name))); }
  Rng stream(std::uint64_t index) const { return Rng(splitmix(seed_ + 0x9e3779b97f4a7c15ULL * (index + 1))); }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  /// Standard normal by Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  template <Real T>
  Tensor<T> normal_tensor(Shape shape, double stddev) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data()) v = static_cast<T>(stddev * normal());
    return t;
  }

  template <Real T>
  Tensor<T> uniform_tensor(Shape shape, double lo, double hi) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.data()) v = static_cast<T>(uniform(lo, hi));
    return t;
  }

  static constexpr std::uint64_t splitmix(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  static constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Scaled-normal initialization, std = 1/sqrt(fan_in).
template <Real T>
Tensor<T> init_weight(const Rng& root, std::string_view name, std::size_t fan_in,
                      std::size_t fan_out, double gain = 1.0) {
  Rng r = root.stream(name);
  return r.normal_tensor<T>({fan_in, fan_out}, gain / std::sqrt(static_cast<double>(fan_in)));
}

}  // namespace scout
