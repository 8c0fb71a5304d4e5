#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "../support/gradient_suite.hpp"
#include "../support/oracles.hpp"
#include "rankgan/autodiff.hpp"
#include "rankgan/errors.hpp"
#include "rankgan/gradcheck.hpp"

namespace {

using namespace rankgan;

Var scalar_leaf(double v) { return Var(Tensor::scalar(v), true); }

TEST(Autodiff, ReluClampsNegativeInput) {
  EXPECT_EQ(relu(Var(Tensor::scalar(-2.0))).item(), 0.0);
}

TEST(Autodiff, MeanOfVector) { EXPECT_DOUBLE_EQ(mean(Var(Tensor::vector({1, 2, 3, 6}))).item(), 3.0); }

TEST(Autodiff, L2NormOfVector) { EXPECT_DOUBLE_EQ(l2_norm(Var(Tensor::vector({3, 4}))).item(), 5.0); }

TEST(Autodiff, SquareDerivative) {
  const Var x = scalar_leaf(3.0);
  EXPECT_DOUBLE_EQ(grad(square(x), std::span<const Var>(&x, 1))[0].item(), 6.0);
}

TEST(Autodiff, ProductGradient) {
  const Var xy[] = {scalar_leaf(2.0), scalar_leaf(3.0)};
  const auto g = grad(xy[0] * xy[1], xy);
  EXPECT_DOUBLE_EQ(g[0].item(), 3.0);
  EXPECT_DOUBLE_EQ(g[1].item(), 2.0);
}

TEST(Autodiff, DoubleBackpropOfSquaredDerivative) {
  // g(x) = (d/dx x^2)^2 = 4x^2, g'(3) = 24.
  const Var x = scalar_leaf(3.0);
  const Var df = grad(square(x), std::span<const Var>(&x, 1), true)[0];
  const Var g = square(df);
  EXPECT_DOUBLE_EQ(g.item(), 36.0);
  EXPECT_DOUBLE_EQ(grad(g, std::span<const Var>(&x, 1))[0].item(), 24.0);
}

TEST(Autodiff, KinkConventions) {
  const Var x = scalar_leaf(0.0);
  const std::span<const Var> wrt(&x, 1);
  EXPECT_EQ(grad(relu(x), wrt)[0].item(), 0.0);
  EXPECT_DOUBLE_EQ(grad(leaky_relu(x, 0.2), wrt)[0].item(), 0.2);
  EXPECT_EQ(grad(rankgan::abs(x), wrt)[0].item(), 0.0);
  EXPECT_EQ(grad(rankgan::sqrt(x), wrt)[0].item(), 0.0);
}

TEST(Autodiff, UnreachableInputGetsZeroGradient) {
  const Var xs[] = {Var(Tensor::vector({1, 2}), true), Var(Tensor::matrix({{1, 2}, {3, 4}}), true)};
  const auto g = grad(sum(xs[0]), xs);
  EXPECT_EQ(g[1].value(), Tensor::zeros({2, 2}));
}

TEST(Autodiff, NonScalarOutputRejected) {
  const Var x(Tensor::vector({1, 2}), true);
  EXPECT_THROW(grad(x * 2.0, std::span<const Var>(&x, 1)), ShapeError);
}

TEST(Autodiff, ShapeMismatchNamesShapesAndOp) {
  const Var a(Tensor::zeros({2, 3}));
  const Var b(Tensor::zeros({4}));
  try {
    (void)add(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("add"), std::string::npos) << msg;
  }
}

TEST(Autodiff, NanDuringBackwardNamesOperation) {
  // log at 0 gives -inf forward and inf * 0 = nan in the backward product.
  const Var x(Tensor::vector({0.0, 1.0}), true);
  const Var y = rankgan::log(x) * Var(Tensor::vector({0.0, 1.0}));
  try {
    (void)grad(sum(y), std::span<const Var>(&x, 1));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("log"), std::string::npos) << e.what();
  }
}

TEST(Autodiff, NoGradGuardStopsRecording) {
  const Var x(Tensor::vector({1, 2}), true);
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_mode_enabled());
    const Var y = x * x;
    EXPECT_TRUE(y.is_leaf());
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(grad_mode_enabled());
  EXPECT_FALSE((x * x).is_leaf());
}

TEST(Autodiff, GradientsWithoutCreateGraphAreConstants) {
  const Var x = scalar_leaf(2.0);
  const Var g = grad(x * x * x, std::span<const Var>(&x, 1))[0];
  EXPECT_TRUE(g.is_leaf());
  EXPECT_DOUBLE_EQ(g.item(), 12.0);
}

TEST(Autodiff, BroadcastFollowsTrailingAlignment) {
  const Var a(Tensor::matrix({{1}, {2}, {3}}));
  const Var b(Tensor::vector({10, 20}));
  const Var c = a + b;
  EXPECT_EQ(c.shape(), (Shape{3, 2}));
  EXPECT_DOUBLE_EQ(c.value().at(2, 1), 23.0);
  EXPECT_THROW((void)(Var(Tensor::zeros({3, 2})) + Var(Tensor::zeros({3}))), ShapeError);
}

TEST(Autodiff, SoftplusStableForLargeInputs) {
  const Var x(Tensor::vector({-800.0, 800.0}));
  const Var y = softplus(x);
  EXPECT_TRUE(y.value().all_finite());
  EXPECT_DOUBLE_EQ(y.value()[1], 800.0);
}

TEST(Autodiff, GraphIsAcyclic) {
  // Walk parents from the output: a cycle would revisit a node on the stack.
  const Var x(Tensor::vector({1, 2, 3}), true);
  Var y = x;
  for (int i = 0; i < 5; ++i) y = rankgan::tanh(y * 1.1 + x);
  std::function<bool(const detail::Node*, std::vector<const detail::Node*>&)> acyclic =
      [&](const detail::Node* n, std::vector<const detail::Node*>& stack) {
        for (const auto* s : stack) {
          if (s == n) return false;
        }
        stack.push_back(n);
        for (const Var& p : n->parents) {
          if (!acyclic(p.node(), stack)) return false;
        }
        stack.pop_back();
        return true;
      };
  std::vector<const detail::Node*> stack;
  EXPECT_TRUE(acyclic(sum(y).node(), stack));
}

TEST(Autodiff, DeterministicAcrossRuns) {
  auto run = [] {
    std::mt19937_64 rng(7);
    const Tensor a = gradient_suite::draw({4, 3}, {}, rng);
    const Var x(a, true);
    const Var out = sum(rankgan::tanh(matmul(x, transpose(x))));
    return grad(out, std::span<const Var>(&x, 1))[0].value();
  };
  EXPECT_EQ(run(), run());
}

TEST(AutodiffProperty, EveryPrimitiveMatchesCentralDifferences) {
  for (const auto& r : gradient_suite::primitive_checks(20240501, 20)) {
    EXPECT_LT(r.max_rel_error, 1e-5) << r.name;
  }
}

TEST(AutodiffProperty, DoubleBackpropMatchesNestedDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    EXPECT_LT(gradient_suite::gp_double_backprop_error(seed), 1e-3) << "seed " << seed;
  }
}

TEST(AutodiffProperty, SecondOrderOfRandomCompositions) {
  // Random chains of smooth primitives, checked through gradient norms.
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor p0 = gradient_suite::draw({2, 3}, {}, rng);
    const Tensor p1 = gradient_suite::draw({3}, {}, rng);
    const int which = trial % 3;
    const ScalarFn f = [which](std::span<const Var> p) {
      Var h = matmul(Var(Tensor::matrix({{0.5, -1.0}, {1.5, 0.3}})), p[0]) + p[1];
      if (which == 0) h = rankgan::tanh(h);
      if (which == 1) h = sigmoid(h) * rankgan::exp(h * 0.3);
      if (which == 2) h = softplus(h) + square(h);
      return sum(h * h);
    };
    const Tensor params[] = {p0, p1};
    EXPECT_LT(finite_difference_check(f, params, 1e-5, CheckOrder::Second), 1e-3) << trial;
  }
}

}  // namespace
