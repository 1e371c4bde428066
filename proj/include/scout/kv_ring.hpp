// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "scout/tensor.hpp"

namespace scout {

inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

/// Instrumentation for incremental attention.
struct OpCounter {
  std::uint64_t score_dots = 0;
};

/// Key/value rows kept for incremental attention. With a finite capacity the
/// oldest row is evicted on overflow; with kUnbounded it only grows.
/// Rows are addressed oldest-first.
template <Real T>
class KvRing {
 public:
  KvRing() = default;
  KvRing(std::size_t width, std::size_t capacity) : width_(width), capacity_(capacity) {
    if (capacity_ != kUnbounded) {
      keys_.resize(capacity_ * width_);
      values_.resize(capacity_ * width_);
    }
  }

  std::size_t size() const noexcept { return count_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t capacity() const noexcept { return capacity_; }
  /// Scalars held, keys and values together.
  std::size_t stored_numbers() const noexcept { return 2 * count_ * width_; }

  void push(std::span<const T> key, std::span<const T> value) {
    if (capacity_ == 0) return;
    if (capacity_ == kUnbounded) {
      keys_.insert(keys_.end(), key.begin(), key.end());
      values_.insert(values_.end(), value.begin(), value.end());
      ++count_;
      return;
    }
    const std::size_t slot = (head_ + count_) % capacity_;
    std::copy(key.begin(), key.end(), keys_.begin() + static_cast<std::ptrdiff_t>(slot * width_));
    std::copy(value.begin(), value.end(), values_.begin() + static_cast<std::ptrdiff_t>(slot * width_));
    if (count_ < capacity_) {
      ++count_;
    } else {
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::span<const T> key(std::size_t i) const noexcept { return {keys_.data() + slot(i) * width_, width_}; }
  std::span<const T> value(std::size_t i) const noexcept { return {values_.data() + slot(i) * width_, width_}; }

 private:
  std::size_t slot(std::size_t i) const noexcept {
    return capacity_ == kUnbounded ? i : (head_ + i) % capacity_;
  }

  std::size_t width_ = 0;
  std::size_t capacity_ = 0;
  std::size_t head_ = 0;
  std::size_t count_ = 0;
  std::vector<T, TrackingAllocator<T>> keys_;
  std::vector<T, TrackingAllocator<T>> values_;
};

/// One query against every cached row followed by the query's own key/value,
/// softmax over q.k / sqrt(d). Each q.k inner product is counted.
template <Real T>
Tensor<T> attend_with_self(std::span<const T> q, const KvRing<T>& cache, std::span<const T> self_key,
                           std::span<const T> self_value, OpCounter* counter) {
  const std::size_t d = q.size();
  const std::size_t m = cache.size();
  const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(d));
  std::vector<T> s(m + 1);
  for (std::size_t j = 0; j < m; ++j) s[j] = kernels::dot(q.data(), cache.key(j).data(), d) * inv_sqrt_d;
  s[m] = kernels::dot(q.data(), self_key.data(), d) * inv_sqrt_d;
  if (counter) counter->score_dots += m + 1;
  const T mx = *std::max_element(s.begin(), s.end());
  T z = 0;
  for (auto& v : s) {
    v = std::exp(v - mx);
    z += v;
  }
  Tensor<T> out({d});
  for (std::size_t j = 0; j <= m; ++j) {
    const T p = s[j] / z;
    auto v = j < m ? cache.value(j) : self_value;
    for (std::size_t c = 0; c < d; ++c) out[c] += p * v[c];
  }
  return out;
}

}  // namespace scout
