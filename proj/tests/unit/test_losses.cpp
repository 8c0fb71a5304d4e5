#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "../support/gradient_suite.hpp"
#include "../support/oracles.hpp"
#include "rankgan/errors.hpp"
#include "rankgan/losses.hpp"
#include "rankgan/nn.hpp"

namespace {

using namespace rankgan;

Var v(std::initializer_list<double> xs) { return Var(Tensor::vector(xs)); }
Var leaf(const Tensor& t) { return Var(t, true); }

TEST(MarginLoss, Examples) {
  EXPECT_EQ(margin_loss(v({0}), v({1.0}), 1.0).item(), 0.0);
  EXPECT_DOUBLE_EQ(margin_loss(v({5}), v({1}), 1.0).item(), 5.0);

  const Var f = leaf(Tensor::vector({-10})), r = leaf(Tensor::vector({10}));
  const Var l = margin_loss(f, r, 1.0);
  EXPECT_EQ(l.item(), 0.0);
  const Var both[] = {f, r};
  const auto g = grad(l, both);
  EXPECT_EQ(g[0].item(), 0.0);
  EXPECT_EQ(g[1].item(), 0.0);
}

TEST(MarginLoss, ContractErrors) {
  EXPECT_THROW(margin_loss(v({1, 2}), v({1}), 1.0), ShapeError);
  EXPECT_THROW(margin_loss(v({1}), v({1}), -0.5), ShapeError);
  EXPECT_NO_THROW(margin_loss(v({1, 2}), v({1}), 1.0, Pairing::BatchMean));
}

TEST(DiscRankLoss, Examples) {
  EXPECT_EQ(disc_rank_loss(v({1.5, -2}), v({1.5, -2})).item(), 0.0);
  EXPECT_DOUBLE_EQ(disc_rank_loss(v({3}), v({1})).item(), 2.0);
  EXPECT_EQ(disc_rank_loss(v({0}), v({4})).item(), 0.0);
}

TEST(GenRankLoss, Examples) {
  EXPECT_EQ(gen_rank_loss(v({2}), v({2})).item(), 0.0);
  EXPECT_DOUBLE_EQ(gen_rank_loss(v({3}), v({0})).item(), 3.0);
  EXPECT_EQ(gen_rank_loss(v({0}), v({5})).item(), 0.0);
}

TEST(Pairing, PerSampleAndBatchMeanDiffer) {
  // Per-sample hinges ignore the sample that is already ordered.
  EXPECT_DOUBLE_EQ(disc_rank_loss(v({3, -3}), v({1, 1})).item(), 1.0);
  EXPECT_EQ(disc_rank_loss(v({3, -3}), v({1, 1}), Pairing::BatchMean).item(), 0.0);
}

Mlp linear_critic(std::vector<double> w) {
  Mlp m = zero_mlp({{w.size(), 1}});
  Tensor& t = m.params.mutable_at("layer0.weight");
  for (std::size_t i = 0; i < w.size(); ++i) t[i] = w[i];
  return m;
}

Var penalty_of(const Mlp& m, const Tensor& real, const Tensor& fake, const Tensor& u) {
  const BoundParams b(m.params, true);
  const Critic c = [&](const Var& in) { return mlp_forward(m.spec, b.vars(), in); };
  return gradient_penalty(c, real, fake, u);
}

TEST(GradientPenalty, UnitLinearCriticHasZeroPenalty) {
  Rng rng(1);
  const Mlp m = linear_critic({0.6, 0.8});
  EXPECT_NEAR(penalty_of(m, uniform({8, 2}, -3, 3, rng), uniform({8, 2}, -3, 3, rng), uniform({8}, 0, 1, rng)).item(),
              0.0, 1e-15);
}

TEST(GradientPenalty, SlopeTwoInOneDimension) {
  const Mlp m = linear_critic({2.0});
  EXPECT_DOUBLE_EQ(penalty_of(m, Tensor::matrix({{1}, {4}}), Tensor::matrix({{0}, {-2}}), Tensor::vector({0.3, 0.9})).item(),
                   1.0);
}

TEST(GradientPenalty, RandomTanhCriticMatchesNestedDifferences) {
  EXPECT_LT(gradient_suite::gp_double_backprop_error(2024, 4), 1e-3);
}

TEST(GradientPenalty, ShapeContract) {
  const Mlp m = linear_critic({1.0, 1.0});
  EXPECT_THROW(penalty_of(m, Tensor::zeros({3, 2}), Tensor::zeros({2, 2}), Tensor::zeros({3})), ShapeError);
  EXPECT_THROW(penalty_of(m, Tensor::zeros({3, 2}), Tensor::zeros({3, 2}), Tensor::zeros({2})), ShapeError);
}

TEST(GradientPenaltyProperty, LinearCriticOfNormR) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    oracle::Vec dir = oracle::random_vec(3, rng);
    double n = 0.0;
    for (double d : dir) n += d * d;
    const double r = std::uniform_real_distribution<double>(0.1, 3.0)(rng);
    for (double& d : dir) d *= r / std::sqrt(n);
    Rng trng(rng());
    const Mlp m = linear_critic(dir);
    const double gp = penalty_of(m, uniform({5, 3}, -2, 2, trng), uniform({5, 3}, -2, 2, trng), uniform({5}, 0, 1, trng)).item();
    EXPECT_NEAR(gp, (r - 1) * (r - 1), 1e-12);
  }
}

TEST(ClampLoss, Examples) {
  EXPECT_EQ(clamp_loss(v({0.5, 1.5}), v({-1, 1}), {1.0, 0.0}).item(), 0.0);
  EXPECT_DOUBLE_EQ(clamp_loss(v({0.5}), v({-0.5}), {1.0, -1.0}).item(), 1.0);
  EXPECT_EQ(clamp_loss(v({3}), v({-3}), {1.0, -1.0}).item(), 0.0);
}

TEST(DiscTotalLoss, Examples) {
  const LossWeights w;
  EXPECT_EQ(w.lambda_gp, 10.0);
  EXPECT_EQ(w.lambda_clamp, 1000.0);
  EXPECT_DOUBLE_EQ(disc_total_loss({v({1}), v({1}), v({1})}, w).item(), 1011.0);
  EXPECT_EQ(disc_total_loss({v({0}), v({0}), v({0})}, w).item(), 0.0);
  EXPECT_DOUBLE_EQ(disc_total_loss({v({0.5}), v({0.1}), v({0})}, w).item(), 1.5);
}

TEST(BaselineLoss, Examples) {
  EXPECT_EQ(baseline_loss(BaselineKind::Wgan, v({2}), v({2}), Role::Disc).item(), 0.0);
  EXPECT_EQ(baseline_loss(BaselineKind::Lsgan, v({1, 1}), v({0, 0}), Role::Disc).item(), 0.0);
  EXPECT_NEAR(baseline_loss(BaselineKind::Gan, v({0}), v({0}), Role::Disc).item(), 2.0 * std::log(2.0), 1e-15);
}

TEST(BaselineLoss, GeneratorForms) {
  EXPECT_DOUBLE_EQ(baseline_loss(BaselineKind::Wgan, v({9}), v({1, 3}), Role::Gen).item(), -2.0);
  EXPECT_DOUBLE_EQ(baseline_loss(BaselineKind::Lsgan, v({9}), v({1, 3}), Role::Gen).item(), 0.5 * (0 + 4) / 2);
  EXPECT_NEAR(baseline_loss(BaselineKind::Gan, v({9}), v({0}), Role::Gen).item(), std::log(2.0), 1e-15);
}

TEST(BaselineLoss, UnknownKindRejected) {
  EXPECT_EQ(parse_baseline_kind("lsgan"), BaselineKind::Lsgan);
  EXPECT_THROW(parse_baseline_kind("ebgan"), ConfigError);
}

TEST(LossProperty, WganLimitOfMarginLoss) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    Rng r(rng());
    const Var f(uniform({16}, -5, 5, r)), re(uniform({16}, -5, 5, r));
    const double eps = 1e6;
    const double lhs = margin_loss(f, re, eps).item();
    const double rhs = baseline_loss(BaselineKind::Wgan, re, f, Role::Disc).item() + eps;
    EXPECT_NEAR(lhs, rhs, 4 * std::numeric_limits<double>::epsilon() * eps) << trial;
  }
}

TEST(LossProperty, HingeDeadZoneHasZeroGradients) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    Rng r(rng());
    const Var lo = leaf(uniform({8}, -3, -1, r));
    const Var hi = leaf(uniform({8}, 1, 3, r));
    const Var both[] = {lo, hi};
    for (const Var& loss : {margin_loss(lo, hi, 0.5), disc_rank_loss(lo, hi), gen_rank_loss(lo, hi),
                            clamp_loss(hi, lo, {0.0, 0.0})}) {
      EXPECT_EQ(loss.item(), 0.0);
      for (const Var& g : grad(loss, both)) EXPECT_EQ(g.value(), Tensor::zeros({8}));
    }
  }
}

TEST(LossProperty, NonNegativeExceptWgan) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Rng r(rng());
    const Var a(uniform({6}, -4, 4, r)), b(uniform({6}, -4, 4, r));
    EXPECT_GE(margin_loss(a, b, 1.0).item(), 0.0);
    EXPECT_GE(disc_rank_loss(a, b).item(), 0.0);
    EXPECT_GE(gen_rank_loss(a, b).item(), 0.0);
    EXPECT_GE(clamp_loss(a, b, {0.3, -0.2}).item(), 0.0);
    for (Role role : {Role::Disc, Role::Gen}) {
      EXPECT_GE(baseline_loss(BaselineKind::Gan, a, b, role).item(), 0.0);
      EXPECT_GE(baseline_loss(BaselineKind::Lsgan, a, b, role).item(), 0.0);
    }
  }
}

TEST(LossProperty, TranslationOfCriticOutput) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    Rng r(rng());
    const Tensor a = uniform({6}, -2, 2, r), b = uniform({6}, -2, 2, r);
    const double c = std::uniform_real_distribution<double>(-3, 3)(rng);
    const Var sa(a), sb(b), ta = Var(a) + c, tb = Var(b) + c;
    EXPECT_NEAR(disc_rank_loss(ta, tb).item(), disc_rank_loss(sa, sb).item(), 1e-12);
    EXPECT_NEAR(gen_rank_loss(ta, tb).item(), gen_rank_loss(sa, sb).item(), 1e-12);

    // Shifting scores by c moves each clamp hinge argument by -c and +c.
    const MarginPair m{0.1, -0.1};
    const double mean_a = mean(sa).item(), mean_b = mean(sb).item();
    const double expect = std::max(0.0, m.high - mean_a - c) + std::max(0.0, mean_b + c - m.low);
    EXPECT_NEAR(clamp_loss(ta, tb, m).item(), expect, 1e-12);
    const double unshifted = std::max(0.0, m.high - mean_a) + std::max(0.0, mean_b - m.low);
    EXPECT_NEAR(clamp_loss(sa, sb, m).item(), unshifted, 1e-12);
  }
}

TEST(LossProperty, CompositionsMatchCentralDifferences) {
  for (const auto& r : gradient_suite::loss_checks(77, 5)) EXPECT_LT(r.max_rel_error, 1e-5) << r.name;
}

TEST(MarginPair, OrderingIsReportedNotEnforced) {
  EXPECT_TRUE((MarginPair{1.0, 0.5}.ordered()));
  EXPECT_FALSE((MarginPair{0.0, 0.5}.ordered()));
  EXPECT_NO_THROW(clamp_loss(v({0}), v({0}), {0.0, 0.5}));
}

}  // namespace
