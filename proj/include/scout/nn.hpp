// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "scout/autodiff.hpp"
#include "scout/rng.hpp"

namespace scout {

template <Real T>
struct LayerNormParams {
  Tensor<T> gain;
  Tensor<T> bias;

  static LayerNormParams identity(std::size_t d) { return {Tensor<T>({d}, T(1)), Tensor<T>({d}, T(0))}; }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".gain", gain);
    f(prefix + ".bias", bias);
  }
  template <class F>
  void visit(const std::string& prefix, F&& f) const {
    f(prefix + ".gain", gain);
    f(prefix + ".bias", bias);
  }
};

/// Two-layer position-wise feedforward: SiLU(x W_in + b_in) W_out + b_out.
template <Real T>
struct MlpParams {
  Tensor<T> w_in;
  Tensor<T> b_in;
  Tensor<T> w_out;
  Tensor<T> b_out;

  static MlpParams init(const Rng& rng, const std::string& prefix, std::size_t d, std::size_t hidden) {
    return {init_weight<T>(rng, prefix + ".w_in", d, hidden), Tensor<T>({hidden}),
            init_weight<T>(rng, prefix + ".w_out", hidden, d), Tensor<T>({d})};
  }

  static std::size_t param_count(std::size_t d, std::size_t hidden) { return 2 * d * hidden + hidden + d; }

  template <class F>
  void visit(const std::string& prefix, F&& f) {
    f(prefix + ".w_in", w_in);
    f(prefix + ".b_in", b_in);
    f(prefix + ".w_out", w_out);
    f(prefix + ".b_out", b_out);
  }
  template <class F>
  void visit(const std::string& prefix, F&& f) const {
    f(prefix + ".w_in", w_in);
    f(prefix + ".b_in", b_in);
    f(prefix + ".w_out", w_out);
    f(prefix + ".b_out", b_out);
  }
};

template <Real T>
Var apply(Graph<T>& g, Var x, const LayerNormParams<T>& p) {
  return ag::layer_norm(g, x, g.leaf(p.gain), g.leaf(p.bias));
}

template <Real T>
Var apply(Graph<T>& g, Var x, const MlpParams<T>& p) {
  Var h = ag::silu(g, ag::add_bias(g, ag::matmul(g, x, g.leaf(p.w_in)), g.leaf(p.b_in)));
  return ag::add_bias(g, ag::matmul(g, h, g.leaf(p.w_out)), g.leaf(p.b_out));
}

/// x + MLP(LN(x)).
template <Real T>
Var residual_mlp(Graph<T>& g, Var x, const LayerNormParams<T>& ln, const MlpParams<T>& mlp) {
  return ag::add(g, x, apply(g, apply(g, x, ln), mlp));
}

/// Evaluates `f(graph, row_var)` on a single row without recording.
template <Real T, class F>
Tensor<T> eval_row(std::span<const T> row, F&& f) {
  Graph<T> g(false);
  Var x = g.constant(Tensor<T>({1, row.size()}, row));
  return g.value(f(g, x));
}

}  // namespace scout
