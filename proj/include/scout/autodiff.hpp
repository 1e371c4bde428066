// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "scout/errors.hpp"
#include "scout/tensor.hpp"

namespace scout {

/// Handle to a node in a Graph.
struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
};

/// Tape of whole-tensor operations with reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so inputs always precede their
/// consumers and backward() can walk the tape in reverse. A graph constructed
/// with `record = false` only evaluates; no closures or gradients are kept.
template <Real T>
class Graph {
 public:
  using Backward = std::function<void(Graph&, const Tensor<T>& out_grad)>;

  explicit Graph(bool record = true) : record_(record) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) noexcept = default;
  Graph& operator=(Graph&&) noexcept = default;

  bool recording() const noexcept { return record_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Leaf that never receives a gradient.
  Var constant(Tensor<T> v) {
    v.require_finite("constant");
    return push("constant", {}, std::move(v), false, nullptr);
  }

  /// Owned leaf that receives a gradient.
  Var input(Tensor<T> v) {
    v.require_finite("input");
    return push("input", {}, std::move(v), record_, nullptr);
  }

  /// Leaf bound to an external tensor (a model parameter). Binding the same
  /// tensor twice yields the same Var. The tensor must outlive the graph.
  Var leaf(const Tensor<T>& param) {
    if (auto it = leaves_.find(&param); it != leaves_.end()) return Var{it->second};
    param.require_finite("parameter");
    Node n;
    n.op = "parameter";
    n.external = &param;
    n.requires_grad = record_;
    nodes_.push_back(std::move(n));
    leaves_.emplace(&param, nodes_.size() - 1);
    return Var{nodes_.size() - 1};
  }

  const Tensor<T>& value(Var v) const { return node(v).value_ref(); }
  const Shape& shape(Var v) const { return value(v).shape(); }
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  const char* op_name(Var v) const { return node(v).op; }
  const std::vector<std::size_t>& inputs(Var v) const { return node(v).inputs; }

  /// Appends an operation node. `bw` receives the gradient of the output and
  /// accumulates into its inputs through grad_target().
  Var record(const char* op, std::initializer_list<Var> inputs, Tensor<T> value, Backward bw) {
    value.require_finite(op);
    bool rg = false;
    if (record_) {
      for (Var in : inputs) rg = rg || requires_grad(in);
    }
    std::vector<std::size_t> ids;
    ids.reserve(inputs.size());
    for (Var in : inputs) ids.push_back(checked(in));
    return push(op, std::move(ids), std::move(value), rg, rg ? std::move(bw) : Backward{});
  }

  /// Gradient accumulator for an input inside a backward closure, or null when
  /// the input does not need one.
  Tensor<T>* grad_target(Var v) {
    Node& n = node(v);
    if (!n.requires_grad) return nullptr;
    if (!n.has_grad) {
      n.grad = Tensor<T>(n.value_ref().shape());
      n.has_grad = true;
    }
    return &n.grad;
  }

  /// Reverse-mode accumulation from a scalar loss.
  void backward(Var loss) {
    const Node& l = node(loss);
    if (l.value_ref().size() != 1) {
      throw UsageError("backward: loss must be a scalar, got shape " +
                       shape_str(l.value_ref().shape()));
    }
    if (!record_) throw UsageError("backward: graph was built without recording");
    for (auto& n : nodes_) {
      if (n.has_grad) n.grad.fill(T(0));
    }
    if (!l.requires_grad) return;
    grad_target(loss)->fill(T(1));
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad || !n.backward) continue;
      n.backward(*this, n.grad);
    }
  }

  /// Gradient of a node after backward(); zeros when the node is not on any
  /// path to the loss.
  Tensor<T> grad(Var v) const {
    const Node& n = node(v);
    if (n.has_grad) return n.grad;
    return Tensor<T>(n.value_ref().shape());
  }

  /// Gradient for a parameter bound with leaf(); zeros when never bound.
  Tensor<T> grad_of(const Tensor<T>& param) const {
    if (auto it = leaves_.find(&param); it != leaves_.end()) return grad(Var{it->second});
    return Tensor<T>(param.shape());
  }

  bool is_bound(const Tensor<T>& param) const { return leaves_.contains(&param); }

 private:
  struct Node {
    const char* op = "";
    std::vector<std::size_t> inputs;
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    Backward backward;
    bool requires_grad = false;
    bool has_grad = false;

    const Tensor<T>& value_ref() const { return external ? *external : value; }
  };

  std::size_t checked(Var v) const {
    if (v.id >= nodes_.size()) throw InternalError("graph: dangling Var");
    return v.id;
  }
  Node& node(Var v) { return nodes_[checked(v)]; }
  const Node& node(Var v) const { return nodes_[checked(v)]; }

  Var push(const char* op, std::vector<std::size_t> inputs, Tensor<T> value, bool rg,
           Backward bw) {
    Node n;
    n.op = op;
    n.inputs = std::move(inputs);
    n.value = std::move(value);
    n.requires_grad = rg;
    n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  bool record_;
  std::vector<Node> nodes_;
  std::unordered_map<const Tensor<T>*, std::size_t> leaves_;
};

/// Differentiable operations. Every op validates shapes, evaluates eagerly
/// and registers its vector-Jacobian product with the graph.
namespace ag {

namespace detail {

inline void require_rank2(const Shape& s, const char* op) {
  if (s.size() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(s));
}

inline void require_same(const Shape& a, const Shape& b, const char* op) {
  if (a != b) throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

template <Real T>
void add_into(Tensor<T>* dst, const Tensor<T>& src, T scale = T(1)) {
  if (!dst) return;
  auto d = dst->data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
}

}  // namespace detail

template <Real T>
Var matmul(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul: cannot multiply " + shape_str(av.shape()) + " by " +
                         shape_str(bv.shape()));
  }
  const std::size_t m = av.dim(0), p = av.dim(1), q = bv.dim(1);
  Tensor<T> out = scout::matmul(av, bv);
  return g.record("matmul", {a, b}, std::move(out), [a, b, m, p, q](Graph<T>& g, const Tensor<T>& go) {
    if (auto* ga = g.grad_target(a)) {
      kernels::gemm_nt_acc(go.data().data(), g.value(b).data().data(), ga->data().data(), m, q, p);
    }
    if (auto* gb = g.grad_target(b)) {
      kernels::gemm_tn_acc(g.value(a).data().data(), go.data().data(), gb->data().data(), m, p, q);
    }
  });
}

template <Real T>
Var transpose(Graph<T>& g, Var a) {
  const auto& av = g.value(a);
  detail::require_rank2(av.shape(), "transpose");
  const std::size_t m = av.dim(0), q = av.dim(1);
  Tensor<T> out({q, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < q; ++j) out(j, i) = av(i, j);
  return g.record("transpose", {a}, std::move(out), [a, m, q](Graph<T>& g, const Tensor<T>& go) {
    if (auto* ga = g.grad_target(a)) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < q; ++j) (*ga)(i, j) += go(j, i);
    }
  });
}

template <Real T>
Var add(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  detail::require_same(av.shape(), bv.shape(), "add");
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return g.record("add", {a, b}, std::move(out), [a, b](Graph<T>& g, const Tensor<T>& go) {
    detail::add_into(g.grad_target(a), go);
    detail::add_into(g.grad_target(b), go);
  });
}

template <Real T>
Var mul(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  detail::require_same(av.shape(), bv.shape(), "mul");
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return g.record("mul", {a, b}, std::move(out), [a, b](Graph<T>& g, const Tensor<T>& go) {
    if (auto* ga = g.grad_target(a)) {
      const auto& bv = g.value(b);
      for (std::size_t i = 0; i < go.size(); ++i) (*ga)[i] += go[i] * bv[i];
    }
    if (auto* gb = g.grad_target(b)) {
      const auto& av = g.value(a);
      for (std::size_t i = 0; i < go.size(); ++i) (*gb)[i] += go[i] * av[i];
    }
  });
}

template <Real T>
Var scale(Graph<T>& g, Var a, T s) {
  const auto& av = g.value(a);
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
  return g.record("scale", {a}, std::move(out), [a, s](Graph<T>& g, const Tensor<T>& go) {
    detail::add_into(g.grad_target(a), go, s);
  });
}

/// x[n x q] + bias[q] broadcast over rows.
template <Real T>
Var add_bias(Graph<T>& g, Var x, Var bias) {
  const auto& xv = g.value(x);
  const auto& bv = g.value(bias);
  detail::require_rank2(xv.shape(), "add_bias");
  if (bv.size() != xv.dim(1)) {
    throw DimensionError("add_bias: bias " + shape_str(bv.shape()) + " does not match " +
                         shape_str(xv.shape()));
  }
  const std::size_t n = xv.dim(0), q = xv.dim(1);
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < q; ++j) out(i, j) = xv(i, j) + bv[j];
  return g.record("add_bias", {x, bias}, std::move(out), [x, bias, n, q](Graph<T>& g, const Tensor<T>& go) {
    detail::add_into(g.grad_target(x), go);
    if (auto* gb = g.grad_target(bias)) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j) (*gb)[j] += go(i, j);
    }
  });
}

template <Real T>
Var sigmoid(Graph<T>& g, Var a) {
  const auto& av = g.value(a);
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-av[i]));
  Tensor<T> saved = out;
  return g.record("sigmoid", {a}, std::move(out), [a, saved = std::move(saved)](Graph<T>& g, const Tensor<T>& go) {
    if (auto* ga = g.grad_target(a)) {
      for (std::size_t i = 0; i < go.size(); ++i) (*ga)[i] += go[i] * saved[i] * (T(1) - saved[i]);
    }
  });
}

template <Real T>
Var silu(Graph<T>& g, Var a) {
  const auto& av = g.value(a);
  Tensor<T> out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] / (T(1) + std::exp(-av[i]));
  return g.record("silu", {a}, std::move(out), [a](Graph<T>& g, const Tensor<T>& go) {
    if (auto* ga = g.grad_target(a)) {
      const auto& x = g.value(a);
      for (std::size_t i = 0; i < go.size(); ++i) {
        const T s = T(1) / (T(1) + std::exp(-x[i]));
        (*ga)[i] += go[i] * s * (T(1) + x[i] * (T(1) - s));
      }
    }
  });
}

/// [a | b] along columns; row counts must match. Either side may have zero columns.
template <Real T>
Var concat_cols(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  detail::require_rank2(av.shape(), "concat_cols");
  detail::require_rank2(bv.shape(), "concat_cols");
  if (av.dim(0) != bv.dim(0)) {
    throw DimensionError("concat_cols: row mismatch " + shape_str(av.shape()) + " vs " +
                         shape_str(bv.shape()));
  }
  const std::size_t n = av.dim(0), qa = av.dim(1), qb = bv.dim(1);
  Tensor<T> out({n, qa + qb});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < qa; ++j) out(i, j) = av(i, j);
    for (std::size_t j = 0; j < qb; ++j) out(i, qa + j) = bv(i, j);
  }
  return g.record("concat_cols", {a, b}, std::move(out), [a, b, n, qa, qb](Graph<T>& g, const Tensor<T>& go) {
    if (auto* ga = g.grad_target(a)) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < qa; ++j) (*ga)(i, j) += go(i, j);
    }
    if (auto* gb = g.grad_target(b)) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < qb; ++j) (*gb)(i, j) += go(i, qa + j);
    }
  });
}

/// Columns [begin, end) of a matrix.
template <Real T>
Var slice_cols(Graph<T>& g, Var a, std::size_t begin, std::size_t end) {
  const auto& av = g.value(a);
  detail::require_rank2(av.shape(), "slice_cols");
  if (begin > end || end > av.dim(1)) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") outside " + shape_str(av.shape()));
  }
  const std::size_t n = av.dim(0), w = end - begin;
  Tensor<T> out({n, w});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < w; ++j) out(i, j) = av(i, begin + j);
  return g.record("slice_cols", {a}, std::move(out), [a, n, w, begin](Graph<T>& g, const Tensor<T>& go) {
    if (auto* ga = g.grad_target(a)) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < w; ++j) (*ga)(i, begin + j) += go(i, j);
    }
  });
}

/// Rows of a matrix picked by 0-based index; indices may repeat.
template <Real T>
Var select_rows(Graph<T>& g, Var a, std::vector<std::size_t> idx) {
  const auto& av = g.value(a);
  detail::require_rank2(av.shape(), "select_rows");
  const std::size_t n = av.dim(0), q = av.dim(1);
  Tensor<T> out({idx.size(), q});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= n) {
      throw InternalError("select_rows: row " + std::to_string(idx[r]) + " outside " +
                          shape_str(av.shape()));
    }
    auto src = av.row(idx[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return g.record("select_rows", {a}, std::move(out), [a, q, idx = std::move(idx)](Graph<T>& g, const Tensor<T>& go) {
    if (auto* ga = g.grad_target(a)) {
      for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::size_t j = 0; j < q; ++j) (*ga)(idx[r], j) += go(r, j);
    }
  });
}

/// Row-wise inner products: out[i] = a_i . b_i, shape [n x 1].
template <Real T>
Var row_dot(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  detail::require_rank2(av.shape(), "row_dot");
  detail::require_same(av.shape(), bv.shape(), "row_dot");
  const std::size_t n = av.dim(0), q = av.dim(1);
  Tensor<T> out({n, 1});
  for (std::size_t i = 0; i < n; ++i) out(i, 0) = kernels::dot(av.row(i).data(), bv.row(i).data(), q);
  return g.record("row_dot", {a, b}, std::move(out), [a, b, n, q](Graph<T>& g, const Tensor<T>& go) {
    if (auto* ga = g.grad_target(a)) {
      const auto& bv = g.value(b);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j) (*ga)(i, j) += go(i, 0) * bv(i, j);
    }
    if (auto* gb = g.grad_target(b)) {
      const auto& av = g.value(a);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j) (*gb)(i, j) += go(i, 0) * av(i, j);
    }
  });
}

/// Scales row i of x[n x q] by s[i] where s has shape [n x 1].
template <Real T>
Var scale_rows(Graph<T>& g, Var x, Var s) {
  const auto& xv = g.value(x);
  const auto& sv = g.value(s);
  detail::require_rank2(xv.shape(), "scale_rows");
  if (sv.size() != xv.dim(0)) {
    throw DimensionError("scale_rows: scale " + shape_str(sv.shape()) + " does not match " +
                         shape_str(xv.shape()));
  }
  const std::size_t n = xv.dim(0), q = xv.dim(1);
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < q; ++j) out(i, j) = sv[i] * xv(i, j);
  return g.record("scale_rows", {x, s}, std::move(out), [x, s, n, q](Graph<T>& g, const Tensor<T>& go) {
    if (auto* gx = g.grad_target(x)) {
      const auto& sv = g.value(s);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < q; ++j) (*gx)(i, j) += go(i, j) * sv[i];
    }
    if (auto* gs = g.grad_target(s)) {
      const auto& xv = g.value(x);
      for (std::size_t i = 0; i < n; ++i) (*gs)[i] += kernels::dot(go.row(i).data(), xv.row(i).data(), q);
    }
  });
}

/// Row-wise softmax stabilized by subtracting the row maximum.
template <Real T>
Var softmax_rows(Graph<T>& g, Var x) {
  const auto& xv = g.value(x);
  detail::require_rank2(xv.shape(), "softmax_rows");
  const std::size_t n = xv.dim(0), q = xv.dim(1);
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < n; ++i) {
    auto in = xv.row(i);
    auto o = out.row(i);
    T mx = -std::numeric_limits<T>::infinity();
    for (T v : in) mx = std::max(mx, v);
    T z = 0;
    for (std::size_t j = 0; j < q; ++j) {
      o[j] = std::exp(in[j] - mx);
      z += o[j];
    }
    for (T& v : o) v /= z;
  }
  Tensor<T> p = out;
  return g.record("softmax_rows", {x}, std::move(out), [x, n, q, p = std::move(p)](Graph<T>& g, const Tensor<T>& go) {
    if (auto* gx = g.grad_target(x)) {
      for (std::size_t i = 0; i < n; ++i) {
        const T s = kernels::dot(go.row(i).data(), p.row(i).data(), q);
        for (std::size_t j = 0; j < q; ++j) (*gx)(i, j) += p(i, j) * (go(i, j) - s);
      }
    }
  });
}

inline constexpr double kLayerNormEps = 1e-5;

/// Per-row normalization to zero mean and unit variance, then gain and bias.
template <Real T>
Var layer_norm(Graph<T>& g, Var x, Var gain, Var bias, T eps = T(kLayerNormEps)) {
  const auto& xv = g.value(x);
  detail::require_rank2(xv.shape(), "layer_norm");
  const std::size_t n = xv.dim(0), d = xv.dim(1);
  if (d == 0) throw DimensionError("layer_norm: zero-width rows");
  if (g.value(gain).size() != d || g.value(bias).size() != d) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(g.value(gain).shape()) + "/" +
                         shape_str(g.value(bias).shape()) + " do not match " + shape_str(xv.shape()));
  }
  const auto& gv = g.value(gain);
  const auto& bv = g.value(bias);
  Tensor<T> xhat(xv.shape());
  Tensor<T> inv_std({n});
  Tensor<T> out(xv.shape());
  for (std::size_t i = 0; i < n; ++i) {
    auto r = xv.row(i);
    T mu = 0;
    for (T v : r) mu += v;
    mu /= static_cast<T>(d);
    T var = 0;
    for (T v : r) var += (v - mu) * (v - mu);
    var /= static_cast<T>(d);
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < d; ++j) {
      xhat(i, j) = (r[j] - mu) * is;
      out(i, j) = xhat(i, j) * gv[j] + bv[j];
    }
  }
  return g.record("layer_norm", {x, gain, bias}, std::move(out),
                  [x, gain, bias, n, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                      Graph<T>& g, const Tensor<T>& go) {
                    const auto& gv = g.value(gain);
                    if (auto* gg = g.grad_target(gain)) {
                      for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < d; ++j) (*gg)[j] += go(i, j) * xhat(i, j);
                    }
                    if (auto* gb = g.grad_target(bias)) {
                      for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t j = 0; j < d; ++j) (*gb)[j] += go(i, j);
                    }
                    if (auto* gx = g.grad_target(x)) {
                      const T inv_d = T(1) / static_cast<T>(d);
                      for (std::size_t i = 0; i < n; ++i) {
                        T mean_g = 0, mean_gx = 0;
                        for (std::size_t j = 0; j < d; ++j) {
                          const T dxh = go(i, j) * gv[j];
                          mean_g += dxh;
                          mean_gx += dxh * xhat(i, j);
                        }
                        mean_g *= inv_d;
                        mean_gx *= inv_d;
                        for (std::size_t j = 0; j < d; ++j) {
                          const T dxh = go(i, j) * gv[j];
                          (*gx)(i, j) += inv_std[i] * (dxh - mean_g - xhat(i, j) * mean_gx);
                        }
                      }
                    }
                  });
}

template <Real T>
Var sum(Graph<T>& g, Var a) {
  const auto& av = g.value(a);
  T s = 0;
  for (T v : av.data()) s += v;
  return g.record("sum", {a}, Tensor<T>::scalar(s), [a](Graph<T>& g, const Tensor<T>& go) {
    if (auto* ga = g.grad_target(a)) {
      for (auto& v : ga->data()) v += go[0];
    }
  });
}

template <Real T>
Var mean(Graph<T>& g, Var a) {
  const std::size_t n = g.value(a).size();
  if (n == 0) throw DimensionError("mean: empty tensor");
  return scale(g, sum(g, a), T(1) / static_cast<T>(n));
}

/// Mean next-token cross-entropy of logits[n x V] against integer targets.
template <Real T>
Var cross_entropy(Graph<T>& g, Var logits, std::span<const std::size_t> targets) {
  const auto& lv = g.value(logits);
  detail::require_rank2(lv.shape(), "cross_entropy");
  const std::size_t n = lv.dim(0), vocab = lv.dim(1);
  if (targets.size() != n || n == 0) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                         shape_str(lv.shape()));
  }
  Tensor<T> p(lv.shape());
  // Neumaier-compensated total, so the mean is accurate to about one rounding.
  T total = 0, comp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] >= vocab) throw InputError("cross_entropy: target id out of range");
    auto r = lv.row(i);
    T mx = -std::numeric_limits<T>::infinity();
    for (T v : r) mx = std::max(mx, v);
    T z = 0;
    for (std::size_t j = 0; j < vocab; ++j) {
      p(i, j) = std::exp(r[j] - mx);
      z += p(i, j);
    }
    for (std::size_t j = 0; j < vocab; ++j) p(i, j) /= z;
    const T term = std::log(z) + (mx - r[targets[i]]);
    const T next = total + term;
    comp += std::abs(total) >= std::abs(term) ? (total - next) + term : (term - next) + total;
    total = next;
  }
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  return g.record("cross_entropy", {logits}, Tensor<T>::scalar((total + comp) / static_cast<T>(n)),
                  [logits, n, vocab, p = std::move(p), tg = std::move(tg)](Graph<T>& g, const Tensor<T>& go) {
                    if (auto* gl = g.grad_target(logits)) {
                      const T s = go[0] / static_cast<T>(n);
                      for (std::size_t i = 0; i < n; ++i) {
                        for (std::size_t j = 0; j < vocab; ++j) (*gl)(i, j) += s * p(i, j);
                        (*gl)(i, tg[i]) -= s;
                      }
                    }
                  });
}

/// Embedding lookup; ids outside the table are an input error.
template <Real T>
Var embedding(Graph<T>& g, Var table, std::span<const std::size_t> ids) {
  const std::size_t vocab = g.value(table).dim(0);
  for (std::size_t id : ids) {
    if (id >= vocab) {
      throw InputError("embedding: token id " + std::to_string(id) + " out of range for vocab " +
                       std::to_string(vocab));
    }
  }
  return select_rows(g, table, std::vector<std::size_t>(ids.begin(), ids.end()));
}

}  // namespace ag
}  // namespace scout
