// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "scout/autodiff.hpp"

namespace scout {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences, coordinate by coordinate, over every tensor in `params`.
///
/// `f(graph)` must bind each tensor with graph.leaf() and return a scalar.
/// Relative error is |analytic - numeric| / max(1e-8, |analytic|).
template <class F>
GradCheckReport grad_check(F&& f, const std::vector<Tensor<double>*>& params, double h = 1e-5) {
  Graph<double> g(true);
  const Var loss = f(g);
  g.backward(loss);
  std::vector<Tensor<double>> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(g.grad_of(*p));

  auto eval = [&]() {
    Graph<double> fg(false);
    const double v = fg.value(f(fg))[0];
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
    return v;
  };

  GradCheckReport rep;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto data = params[t]->data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + h;
      const double up = eval();
      data[i] = orig - h;
      const double down = eval();
      data[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[t][i];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a));
      ++rep.coordinates;
      if (err > rep.max_rel_error || rep.coordinates == 1) {
        rep.max_rel_error = err;
        rep.worst_tensor = t;
        rep.worst_index = i;
        rep.analytic = a;
        rep.numeric = numeric;
      }
    }
  }
  return rep;
}

/// Single-input form: `f(graph, x)` returns a scalar Var.
template <class F>
double grad_check(F&& f, const Tensor<double>& x, double h = 1e-5) {
  Tensor<double> xv = x;
  auto wrapped = [&](Graph<double>& g) { return f(g, g.leaf(xv)); };
  return grad_check(wrapped, std::vector<Tensor<double>*>{&xv}, h).max_rel_error;
}

}  // namespace scout
