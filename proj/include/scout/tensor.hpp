// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "scout/errors.hpp"

namespace scout {

template <class T>
concept Real = std::same_as<T, float> || std::same_as<T, double>;

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

/// Per-thread accounting of live tensor storage. Bench runs use the peak as
/// their memory metric, so it must not depend on the OS allocator.
class MemoryTracker {
 public:
  static void on_alloc(std::size_t bytes) noexcept {
    auto& s = state();
    s.live += static_cast<std::int64_t>(bytes);
    s.peak = std::max(s.peak, s.live);
  }
  static void on_free(std::size_t bytes) noexcept {
    state().live -= static_cast<std::int64_t>(bytes);
  }
  static std::int64_t live() noexcept { return state().live; }
  static std::int64_t peak() noexcept { return state().peak; }
  static void reset_peak() noexcept { state().peak = state().live; }

 private:
  struct State {
    std::int64_t live = 0;
    std::int64_t peak = 0;
  };
  static State& state() noexcept {
    thread_local State s;
    return s;
  }
};

template <class T>
struct TrackingAllocator {
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <class U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    MemoryTracker::on_alloc(n * sizeof(T));
    return std::allocator<T>{}.allocate(n);
  }
  void deallocate(T* p, std::size_t n) noexcept {
    MemoryTracker::on_free(n * sizeof(T));
    std::allocator<T>{}.deallocate(p, n);
  }
  template <class U>
  bool operator==(const TrackingAllocator<U>&) const noexcept {
    return true;
  }
};

/// Dense row-major array with 1 to 3 axes.
template <Real T>
class Tensor {
 public:
  using value_type = T;
  using Storage = std::vector<T, TrackingAllocator<T>>;

  Tensor() : shape_{0} {}

  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    check_rank();
    data_.assign(shape_numel(shape_), fill);
  }

  Tensor(Shape shape, std::span<const T> values) : shape_(std::move(shape)) {
    check_rank();
    if (values.size() != shape_numel(shape_)) {
      throw DimensionError("tensor: " + std::to_string(values.size()) +
                           " values do not fill shape " + shape_str(shape_));
    }
    data_.assign(values.begin(), values.end());
  }

  Tensor(Shape shape, std::initializer_list<T> values)
      : Tensor(std::move(shape), std::span<const T>(values.begin(), values.size())) {}

  /// Builds a 2-D tensor from nested rows.
  static Tensor matrix(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t m = rows.size();
    const std::size_t q = m ? rows.begin()->size() : 0;
    Tensor out({m, q});
    std::size_t i = 0;
    for (const auto& r : rows) {
      if (r.size() != q) throw DimensionError("tensor: ragged matrix literal");
      std::copy(r.begin(), r.end(), out.data_.begin() + static_cast<std::ptrdiff_t>(i * q));
      ++i;
    }
    return out;
  }

  static Tensor scalar(T v) { return Tensor({1}, {v}); }

  template <Real U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    std::transform(data_.begin(), data_.end(), out.data().begin(),
                   [](T v) { return static_cast<U>(v); });
    return out;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rows() const { return shape_.at(0); }
  std::size_t cols() const { return rank() >= 2 ? shape_[rank() - 1] : 1; }
  std::size_t bytes() const noexcept { return data_.size() * sizeof(T); }

  std::span<T> data() noexcept { return {data_.data(), data_.size()}; }
  std::span<const T> data() const noexcept { return {data_.data(), data_.size()}; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * shape_[1] + j]; }
  const T& operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * shape_[1] + j];
  }
  T& operator()(std::size_t i, std::size_t j, std::size_t l) noexcept {
    return data_[(i * shape_[1] + j) * shape_[2] + l];
  }
  const T& operator()(std::size_t i, std::size_t j, std::size_t l) const noexcept {
    return data_[(i * shape_[1] + j) * shape_[2] + l];
  }

  /// Row view of a 2-D tensor.
  std::span<T> row(std::size_t i) noexcept {
    const std::size_t q = cols();
    return {data_.data() + i * q, q};
  }
  std::span<const T> row(std::size_t i) const noexcept {
    const std::size_t q = cols();
    return {data_.data() + i * q, q};
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  void require_finite(const char* op) const {
    if (!all_finite()) throw NumericError(std::string(op) + ": non-finite value");
  }

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  void check_rank() const {
    if (shape_.empty() || shape_.size() > 3) {
      throw DimensionError("tensor: rank must be 1..3, got shape " + shape_str(shape_));
    }
  }

  Shape shape_;
  Storage data_;
};

template <Real T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("max_abs_diff: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  T m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

namespace kernels {

template <Real T>
inline T dot(const T* a, const T* b, std::size_t n) noexcept {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

/// c[m x q] (+)= a[m x p] * b[p x q], all row-major.
///
/// Each output row is accumulated over p in ascending order and depends only
/// on its own row of `a`, so the result of row i does not change with m.
template <Real T>
inline void gemm_nn(const T* __restrict a, const T* __restrict b, T* __restrict c, std::size_t m, std::size_t p, std::size_t q,
                    bool accumulate) noexcept {
  if (!accumulate) std::fill(c, c + m * q, T(0));
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * q;
    const T* ai = a + i * p;
    for (std::size_t l = 0; l < p; ++l) {
      const T s = ai[l];
      const T* bl = b + l * q;
      for (std::size_t j = 0; j < q; ++j) ci[j] += s * bl[j];
    }
  }
}

/// c[p x q] += a[m x p]^T * b[m x q].
template <Real T>
inline void gemm_tn_acc(const T* __restrict a, const T* __restrict b, T* __restrict c, std::size_t m, std::size_t p,
                        std::size_t q) noexcept {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a + i * p;
    const T* bi = b + i * q;
    for (std::size_t l = 0; l < p; ++l) {
      const T s = ai[l];
      T* cl = c + l * q;
      for (std::size_t j = 0; j < q; ++j) cl[j] += s * bi[j];
    }
  }
}

/// c[m x p] += a[m x q] * b[p x q]^T.
template <Real T>
inline void gemm_nt_acc(const T* a, const T* b, T* c, std::size_t m, std::size_t q,
                        std::size_t p) {
  std::vector<T> bt(q * p);
  for (std::size_t l = 0; l < p; ++l)
    for (std::size_t j = 0; j < q; ++j) bt[j * p + l] = b[l * q + j];
  gemm_nn(a, bt.data(), c, m, q, p, true);
}

}  // namespace kernels

/// Plain (non-differentiable) matrix product, used on inference fast paths.
template <Real T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_str(a.shape()) + " by " +
                         shape_str(b.shape()));
  }
  Tensor<T> c({a.dim(0), b.dim(1)});
  kernels::gemm_nn(a.data().data(), b.data().data(), c.data().data(), a.dim(0), a.dim(1),
                   b.dim(1), false);
  return c;
}

/// Row vector x[p] times w[p x q].
template <Real T>
Tensor<T> vecmat(std::span<const T> x, const Tensor<T>& w) {
  if (w.rank() != 2 || x.size() != w.dim(0)) {
    throw DimensionError("vecmat: cannot multiply [" + std::to_string(x.size()) + "] by " +
                         shape_str(w.shape()));
  }
  Tensor<T> y({w.dim(1)});
  kernels::gemm_nn(x.data(), w.data().data(), y.data().data(), 1, x.size(), w.dim(1), false);
  return y;
}

}  // namespace scout
