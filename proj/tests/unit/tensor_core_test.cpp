// Copyright 2026 The scout-layer Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <limits>

#include "scout/autodiff.hpp"
#include "scout/grad_check.hpp"
#include "scout/param_io.hpp"
#include "scout/reference_oracles.hpp"
#include "test_util.hpp"

namespace scout {
namespace {

using testing::randn;
using testing::temp_path;
using D = Tensor<double>;

TEST(Matmul, IdentityCase) {
  const D eye = D::matrix({{1, 0}, {0, 1}});
  const D m = D::matrix({{1, 2}, {3, 4}});
  EXPECT_EQ(matmul(eye, m), m);
}

TEST(Matmul, RowTimesColumn) {
  const D out = matmul(D::matrix({{1, 2}}), D::matrix({{3}, {4}}));
  ASSERT_EQ(out.shape(), (Shape{1, 1}));
  EXPECT_EQ(out[0], 11.0);
}

TEST(Matmul, MatchesTripleLoop) {
  const D a = randn(1, {5, 7});
  const D b = randn(2, {7, 3});
  EXPECT_LT(max_abs_diff(matmul(a, b), oracle::naive_matmul(a, b)), 1e-12);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    (void)matmul(D({2, 3}), D({4, 2}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x2]"), std::string::npos) << msg;
  }
}

TEST(Matmul, RowResultIndependentOfHeight) {
  const D a = randn(3, {40, 16});
  const D b = randn(4, {16, 9});
  const D full = matmul(a, b);
  const D top = matmul(D({3, 16}, a.data().first(48)), b);
  for (std::size_t i = 0; i < top.size(); ++i) EXPECT_EQ(top[i], full[i]);
}

D softmax(const D& x) {
  Graph<double> g(false);
  return g.value(ag::softmax_rows(g, g.constant(x)));
}

TEST(Softmax, UniformRow) {
  const D p = softmax(D::matrix({{0, 0, 0}}));
  for (double v : p.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, SingleLogitIsOne) {
  EXPECT_EQ(softmax(D::matrix({{-7.25}})).data()[0], 1.0);
}

TEST(Softmax, MatchesExtendedPrecision) {
  const D p = softmax(D::matrix({{1, 2, 3}}));
  long double z = std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L);
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(p[j], static_cast<double>(std::exp(static_cast<long double>(j + 1)) / z), 1e-12);
  }
}

TEST(Softmax, RowsSumToOne) {
  const D p = softmax(randn(5, {9, 13}, 4.0));
  for (std::size_t i = 0; i < 9; ++i) {
    double s = 0;
    for (double v : p.row(i)) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Softmax, NanInputIsNumericError) {
  Graph<double> g(false);
  D x = D::matrix({{0, std::numeric_limits<double>::quiet_NaN()}});
  EXPECT_THROW(g.constant(x), NumericError);
}

D layer_norm(const D& x, const D& gain, const D& bias) {
  Graph<double> g(false);
  return g.value(ag::layer_norm(g, g.constant(x), g.constant(gain), g.constant(bias)));
}

TEST(LayerNorm, ConstantRowMapsToZero) {
  const D out = layer_norm(D::matrix({{3, 3, 3, 3}}), D({4}, 1.0), D({4}, 0.0));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNorm, NormalizedRowKeepsValuesUpToEps) {
  const D out = layer_norm(D::matrix({{1, -1}}), D({2}, 1.0), D({2}, 0.0));
  const double expected = 1.0 / std::sqrt(1.0 + 1e-5);
  EXPECT_NEAR(out[0], expected, 1e-15);
  EXPECT_NEAR(out[1], -expected, 1e-15);
}

TEST(LayerNorm, RowStatistics) {
  // Output variance is var / (var + eps), so compare against that exactly.
  const D x = randn(6, {4, 8}, 3.0);
  const D out = layer_norm(x, D({8}, 1.0), D({8}, 0.0));
  auto stats = [](std::span<const double> r) {
    double mu = 0, var = 0;
    for (double v : r) mu += v;
    mu /= static_cast<double>(r.size());
    for (double v : r) var += (v - mu) * (v - mu);
    return std::pair{mu, var / static_cast<double>(r.size())};
  };
  for (std::size_t i = 0; i < 4; ++i) {
    const auto [mu_in, var_in] = stats(x.row(i));
    const auto [mu, var] = stats(out.row(i));
    (void)mu_in;
    EXPECT_LT(std::abs(mu), 1e-12);
    EXPECT_NEAR(var, var_in / (var_in + 1e-5), 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-5);
  }
}

TEST(Backward, SumGivesOnes) {
  Graph<double> g;
  Var x = g.input(randn(7, {2, 3, 4}));
  g.backward(ag::sum(g, x));
  const D gx = g.grad(x);
  for (double v : gx.data()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, HalfSquaredNormGivesX) {
  Graph<double> g;
  const D xv = randn(8, {5, 3});
  Var x = g.input(xv);
  g.backward(ag::scale(g, ag::sum(g, ag::mul(g, x, x)), 0.5));
  EXPECT_LT(max_abs_diff(g.grad(x), xv), 1e-15);
}

TEST(Backward, NonScalarLossIsUsageError) {
  Graph<double> g;
  Var x = g.input(randn(9, {2, 2}));
  EXPECT_THROW(g.backward(ag::scale(g, x, 2.0)), UsageError);
}

TEST(Backward, UnusedParameterGetsZeroGradient) {
  const D used = randn(10, {3, 3});
  const D unused = randn(11, {3, 3});
  Graph<double> g;
  Var u = g.leaf(used);
  Var n = g.leaf(unused);
  (void)n;
  g.backward(ag::sum(g, ag::mul(g, u, u)));
  const D gn = g.grad_of(unused);
  for (double v : gn.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(g.grad_of(unused).shape(), unused.shape());
}

TEST(Backward, TopologicalOrder) {
  Graph<double> g;
  Var a = g.input(randn(12, {2, 2}));
  Var b = ag::matmul(g, a, a);
  Var c = ag::silu(g, b);
  for (Var v : {b, c}) {
    for (std::size_t in : g.inputs(v)) EXPECT_LT(in, v.id);
  }
}

TEST(GradCheck, SumIsExact) {
  auto f = [](Graph<double>& g, Var x) { return ag::sum(g, x); };
  EXPECT_LT(grad_check(f, randn(13, {3, 4})), 1e-10);
}

TEST(GradCheck, SoftmaxDotFixedVector) {
  const D r = randn(14, {3, 5});
  auto f = [&](Graph<double>& g, Var x) { return ag::sum(g, ag::mul(g, ag::softmax_rows(g, x), g.constant(r))); };
  EXPECT_LT(grad_check(f, randn(15, {3, 5})), 1e-6);
}

TEST(GradCheck, NonFiniteFunctionIsNumericError) {
  auto f = [](Graph<double>& g, Var x) { return ag::scale(g, ag::sum(g, x), 1e308); };
  EXPECT_THROW(grad_check(f, D({1}, {1e10})), NumericError);
}

// Every differentiable op against central differences on five random shapes.
struct OpCase {
  const char* name;
  // a, b: [n x q]; c, e: [q]
  std::function<Var(Graph<double>&, Var, Var, Var, Var)> f;
};

TEST(GradCheck, EveryOpOnRandomShapes) {
  const std::vector<std::pair<std::size_t, std::size_t>> shapes = {{1, 1}, {2, 3}, {4, 2}, {3, 5}, {6, 4}};
  std::vector<OpCase> cases = {
      {"matmul", [](auto& g, Var a, Var b, Var, Var) { return ag::matmul(g, a, ag::transpose(g, b)); }},
      {"add", [](auto& g, Var a, Var b, Var, Var) { return ag::add(g, a, b); }},
      {"mul", [](auto& g, Var a, Var b, Var, Var) { return ag::mul(g, a, b); }},
      {"scale", [](auto& g, Var a, Var, Var, Var) { return ag::scale(g, a, -1.7); }},
      {"silu", [](auto& g, Var a, Var, Var, Var) { return ag::silu(g, a); }},
      {"sigmoid", [](auto& g, Var a, Var, Var, Var) { return ag::sigmoid(g, a); }},
      {"concat_cols", [](auto& g, Var a, Var b, Var, Var) { return ag::concat_cols(g, a, b); }},
      {"slice_cols", [](auto& g, Var a, Var, Var, Var) {
         const std::size_t q = g.value(a).dim(1);
         return ag::slice_cols(g, a, q / 2, q);
       }},
      {"select_rows", [](auto& g, Var a, Var, Var, Var) {
         const std::size_t n = g.value(a).dim(0);
         return ag::select_rows(g, a, {n - 1, 0, n / 2, n - 1});
       }},
      {"row_dot", [](auto& g, Var a, Var b, Var, Var) { return ag::row_dot(g, a, b); }},
      {"scale_rows", [](auto& g, Var a, Var b, Var, Var) {
         return ag::scale_rows(g, a, ag::slice_cols(g, b, 0, 1));
       }},
      {"softmax_rows", [](auto& g, Var a, Var, Var, Var) { return ag::softmax_rows(g, a); }},
      {"layer_norm", [](auto& g, Var a, Var, Var c, Var e) { return ag::layer_norm(g, a, c, e); }},
      {"add_bias", [](auto& g, Var a, Var, Var c, Var) { return ag::add_bias(g, a, c); }},
      {"transpose", [](auto& g, Var a, Var, Var, Var) { return ag::transpose(g, a); }},
  };
  std::uint64_t seed = 100;
  for (const auto& c : cases) {
    for (auto [n, q] : shapes) {
      if (std::string(c.name) == "layer_norm" && q < 2) continue;
      D a = randn(seed++, {n, q});
      D b = randn(seed++, {n, q});
      D cv = randn(seed++, {q});
      D ev = randn(seed++, {q});
      auto f = [&](Graph<double>& g) {
        Var out = c.f(g, g.leaf(a), g.leaf(b), g.leaf(cv), g.leaf(ev));
        const auto& s = g.value(out).shape();
        D w = randn(999, s);
        return ag::sum(g, ag::mul(g, out, g.constant(w)));
      };
      const auto rep = grad_check(f, {&a, &b, &cv, &ev});
      EXPECT_LT(rep.max_rel_error, 1e-4) << c.name << " shape " << n << "x" << q;
    }
  }
}

TEST(GradCheck, CrossEntropy) {
  D logits = randn(20, {6, 5});
  const std::vector<std::size_t> tg = {0, 4, 2, 2, 1, 3};
  auto f = [&](Graph<double>& g) { return ag::cross_entropy(g, g.leaf(logits), tg); };
  EXPECT_LT(grad_check(f, {&logits}).max_rel_error, 1e-6);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_EQ(init_weight<double>(Rng(7), "w", 4, 3), init_weight<double>(Rng(7), "w", 4, 3));
  EXPECT_NE(init_weight<double>(Rng(7), "w", 4, 3), init_weight<double>(Rng(7), "v", 4, 3));
}

TEST(Rng, InitScale) {
  const D w = init_weight<double>(Rng(3), "big", 256, 256);
  double s = 0;
  for (double v : w.data()) s += v * v;
  EXPECT_NEAR(s / static_cast<double>(w.size()), 1.0 / 256.0, 0.05 / 256.0);
}

TEST(Tensor, RankLimits) {
  EXPECT_THROW(D(Shape{}), DimensionError);
  EXPECT_THROW(D(Shape{1, 2, 3, 4}), DimensionError);
  EXPECT_THROW(D({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
}

TEST(Tensor, MemoryTrackerCountsLiveBytes) {
  const auto before = MemoryTracker::live();
  {
    D t({100, 10});
    EXPECT_EQ(MemoryTracker::live() - before, static_cast<std::int64_t>(1000 * sizeof(double)));
  }
  EXPECT_EQ(MemoryTracker::live(), before);
}

template <Real T>
void round_trip(std::uint64_t seed) {
  Rng r(seed);
  std::vector<Tensor<T>> ts;
  const std::size_t count = 1 + r.below(5);
  for (std::size_t i = 0; i < count; ++i) {
    Shape s(1 + r.below(3));
    for (auto& d : s) d = 1 + r.below(6);
    ts.push_back(r.normal_tensor<T>(s, 10.0));
  }
  std::vector<std::pair<std::string, const Tensor<T>*>> list;
  for (std::size_t i = 0; i < ts.size(); ++i) list.emplace_back("t" + std::to_string(i), &ts[i]);
  const std::string path = temp_path("rt_" + std::to_string(seed) + ".params");
  save_params(path, list, {{"vocab", "10,32,97"}});
  const auto back = load_params<T>(path);
  EXPECT_EQ(back.precision, static_cast<int>(8 * sizeof(T)));
  EXPECT_EQ(back.meta.at("vocab"), "10,32,97");
  ASSERT_EQ(back.tensors.size(), ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    EXPECT_EQ(back.tensors[i].name, list[i].first);
    EXPECT_EQ(back.tensors[i].value, ts[i]);  // bit-exact
  }
}

TEST(ParamIo, RoundTripIsBitExact) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    round_trip<float>(s);
    round_trip<double>(s + 100);
  }
}

TEST(ParamIo, CorruptFilesAreIoErrors) {
  EXPECT_THROW(load_params<double>(temp_path("does_not_exist.params")), IoError);
  const std::string bad = temp_path("bad.params");
  {
    std::ofstream(bad) << "NOT-PARAMS\n";
  }
  EXPECT_THROW(load_params<double>(bad), IoError);
  const std::string truncated = temp_path("trunc.params");
  {
    std::ofstream(truncated) << "SCOUT-PARAMS 1\nprecision 64\ntensor w 1 4 0\nend\nabc";
  }
  EXPECT_THROW(load_params<double>(truncated), IoError);
}

TEST(ParamIo, HeaderIsPlainText) {
  const D t = D::matrix({{1, 2}, {3, 4}});
  const std::string path = temp_path("hdr.params");
  save_params<double>(path, {{"w", &t}});
  std::ifstream in(path);
  std::string l1, l2, l3, l4;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  std::getline(in, l4);
  EXPECT_EQ(l1, "SCOUT-PARAMS 1");
  EXPECT_EQ(l2, "precision 64");
  EXPECT_EQ(l3, "tensor w 2 2 2 0");
  EXPECT_EQ(l4, "end");
}

}  // namespace
}  // namespace scout
