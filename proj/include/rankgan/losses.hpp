#pragma once

// Margin / ranking / clamping losses and the GAN, WGAN and LSGAN baselines.
// Every function takes critic scores as nodes so the result can be
// back-propagated into whichever model produced them.

#include <functional>
#include <string_view>

#include "rankgan/autodiff.hpp"

namespace rankgan {

struct MarginPair {
  double high = 0.0;
  double low = 0.0;

  // m_high >= m_low is expected but not enforced; computed statistics may
  // violate it on a poorly trained critic.
  bool ordered() const noexcept { return high >= low; }
};

struct LossWeights {
  double lambda_gp = 10.0;
  double lambda_clamp = 1000.0;
  double epsilon_margin = 1.0;
};

// How two score batches are compared inside a hinge.
enum class Pairing {
  PerSample,  // hinge on each paired sample, then average
  BatchMean,  // hinge on the difference of batch means
};

// mean [d_fake + epsilon - d_real]_+
Var margin_loss(const Var& d_fake, const Var& d_real, double epsilon,
                Pairing pairing = Pairing::PerSample);

// mean [d_fake_i - d_fake_prev]_+ : critic ranks current-stage fakes no
// higher than previous-stage fakes.
Var disc_rank_loss(const Var& d_fake_i, const Var& d_fake_prev, Pairing pairing = Pairing::PerSample);

// mean [d_real - d_fake_i]_+ : generator closes the gap to real scores.
Var gen_rank_loss(const Var& d_real, const Var& d_fake_i, Pairing pairing = Pairing::PerSample);

// Critic as a differentiable function of a [batch x features] input node.
using Critic = std::function<Var(const Var&)>;

// E[(||grad_xhat D(xhat)||_2 - 1)^2] with xhat = u x_real + (1 - u) x_fake,
// one u per sample broadcast across features. The inner gradient is built
// with create_graph so the penalty differentiates into the critic.
Var gradient_penalty(const Critic& critic, const Tensor& x_real, const Tensor& x_fake, const Tensor& u);

// [m_high - mean d_real]_+ + [mean d_fake_prev - m_low]_+
Var clamp_loss(const Var& d_real, const Var& d_fake_prev, const MarginPair& margins);

struct DiscLossComponents {
  Var rank;
  Var gp;
  Var clamp;
};

// rank + lambda_gp * gp + lambda_clamp * clamp
Var disc_total_loss(const DiscLossComponents& c, const LossWeights& w);

enum class BaselineKind { Gan, Wgan, Lsgan };
enum class Role { Disc, Gen };

BaselineKind parse_baseline_kind(std::string_view name);

// gan:   disc  mean softplus(-d_real) + mean softplus(d_fake)
//        gen   mean softplus(-d_fake)                 (non-saturating form)
// wgan:  disc  mean d_fake - mean d_real;  gen  -mean d_fake
// lsgan: disc  0.5 (mean (d_real - 1)^2 + mean d_fake^2);  gen  0.5 mean (d_fake - 1)^2
// d_real is ignored for the generator role.
Var baseline_loss(BaselineKind kind, const Var& d_real, const Var& d_fake, Role role);

}  // namespace rankgan
