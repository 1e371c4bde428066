// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Brute-force ground truth for the fast paths. Everything here is written
// with explicit scalar loops over Tensor<double> element access and must not
// call into autodiff, kernels, or the mixer/attention implementations.

#include <cmath>
#include <cstddef>
#include <vector>

#include "scout/tensor.hpp"

namespace scout::oracle {

using Mat = Tensor<double>;
using Row = std::vector<double>;

/// Row r of x times w.
inline Row project(const Mat& x, std::size_t r, const Mat& w) {
  Row out(w.dim(1), 0.0);
  for (std::size_t j = 0; j < w.dim(1); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.dim(0); ++i) s += x(r, i) * w(i, j);
    out[j] = s;
  }
  return out;
}

inline double inner(const Row& a, const Row& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Softmax over `logits` then the weighted sum of `values`.
inline Row weighted_sum(const Row& logits, const std::vector<Row>& values) {
  double mx = logits[0];
  for (double l : logits) mx = l > mx ? l : mx;
  Row w(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    w[i] = std::exp(logits[i] - mx);
    z += w[i];
  }
  Row out(values[0].size(), 0.0);
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += (w[i] / z) * values[i][c];
  return out;
}

inline Mat naive_matmul(const Mat& a, const Mat& b) {
  Mat c({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < a.dim(1); ++l) s += a(i, l) * b(l, j);
      c(i, j) = s;
    }
  return c;
}

/// Checkpoint attention without masks or matrix algebra: for each token t
/// (1-indexed) the candidate list is every checkpoint position p = k, 2k, ...
/// with p <= t, followed by t itself; one softmax over that list.
inline Mat dense_scout_oracle(const Mat& xt, const Mat& wq, const Mat& wk, const Mat& wv, std::size_t k) {
  const std::size_t n = xt.dim(0), d = xt.dim(1);
  Mat out({n, d});
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t t = 1; t <= n; ++t) {
    std::vector<std::size_t> keys;
    for (std::size_t p = k; p <= t; p += k) keys.push_back(p);
    keys.push_back(t);
    const Row q = project(xt, t - 1, wq);
    Row logits;
    std::vector<Row> values;
    for (std::size_t p : keys) {
      logits.push_back(inner(q, project(xt, p - 1, wk)) * scale);
      values.push_back(project(xt, p - 1, wv));
    }
    const Row o = weighted_sum(logits, values);
    for (std::size_t c = 0; c < d; ++c) out(t - 1, c) = o[c];
  }
  return out;
}

/// out_t = sum_{j = max(1, t-w)}^{t} softmax_j(q_t . k_j / sqrt(d)) v_j.
inline Mat naive_swa(const Mat& x1, const Mat& wq, const Mat& wk, const Mat& wv, std::size_t w) {
  const std::size_t n = x1.dim(0), d = x1.dim(1);
  Mat out({n, d});
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t t = 1; t <= n; ++t) {
    const std::size_t lo = t > w ? t - w : 1;
    const Row q = project(x1, t - 1, wq);
    Row logits;
    std::vector<Row> values;
    for (std::size_t j = lo; j <= t; ++j) {
      logits.push_back(inner(q, project(x1, j - 1, wk)) * scale);
      values.push_back(project(x1, j - 1, wv));
    }
    const Row o = weighted_sum(logits, values);
    for (std::size_t c = 0; c < d; ++c) out(t - 1, c) = o[c];
  }
  return out;
}

/// Per-channel recurrence h_t = a_t * h_{t-1} + b_t x_{t,c}, y_{t,c} = c_t . h_t
/// with a_t = sigmoid(x_t W_A), b_t = x_t W_B, c_t = x_t W_C.
inline Mat naive_ssm(const Mat& x1, const Mat& wa, const Mat& wb, const Mat& wc) {
  const std::size_t n = x1.dim(0), d = x1.dim(1), N = wa.dim(1);
  Mat out({n, d});
  std::vector<Row> h(d, Row(N, 0.0));
  for (std::size_t t = 0; t < n; ++t) {
    Row a = project(x1, t, wa);
    for (double& v : a) v = 1.0 / (1.0 + std::exp(-v));
    const Row b = project(x1, t, wb);
    const Row c = project(x1, t, wc);
    for (std::size_t ch = 0; ch < d; ++ch) {
      double y = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        h[ch][i] = a[i] * h[ch][i] + b[i] * x1(t, ch);
        y += c[i] * h[ch][i];
      }
      out(t, ch) = y;
    }
  }
  return out;
}

/// Standard causal softmax attention, one token at a time.
inline Mat full_causal_attention(const Mat& x, const Mat& wq, const Mat& wk, const Mat& wv) {
  return naive_swa(x, wq, wk, wv, x.dim(0));
}

/// Attention weights of full causal attention, row t over columns 0..t.
inline Mat full_causal_weights(const Mat& x, const Mat& wq, const Mat& wk) {
  const std::size_t n = x.dim(0), d = x.dim(1);
  Mat out({n, n});
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t t = 0; t < n; ++t) {
    const Row q = project(x, t, wq);
    double z = 0.0;
    Row e(t + 1);
    double mx = -1e300;
    for (std::size_t j = 0; j <= t; ++j) {
      e[j] = inner(q, project(x, j, wk)) * scale;
      mx = e[j] > mx ? e[j] : mx;
    }
    for (std::size_t j = 0; j <= t; ++j) {
      e[j] = std::exp(e[j] - mx);
      z += e[j];
    }
    for (std::size_t j = 0; j <= t; ++j) out(t, j) = e[j] / z;
  }
  return out;
}

/// Mean next-token cross-entropy from a logits table, by explicit loops.
inline double cross_entropy(const Mat& logits, const std::vector<std::size_t>& targets) {
  double total = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    double mx = logits(i, 0);
    for (std::size_t j = 0; j < logits.dim(1); ++j) mx = logits(i, j) > mx ? logits(i, j) : mx;
    double z = 0.0;
    for (std::size_t j = 0; j < logits.dim(1); ++j) z += std::exp(logits(i, j) - mx);
    total += std::log(z) + mx - logits(i, targets[i]);
  }
  return total / static_cast<double>(targets.size());
}

}  // namespace scout::oracle
