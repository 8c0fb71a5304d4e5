#include "rankgan/losses.hpp"

#include <string>

#include "rankgan/errors.hpp"

namespace rankgan {

namespace {

void require_same(const Var& a, const Var& b, std::string_view op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": score shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " differ");
  }
}

// mean [hi - lo + offset]_+ under the chosen pairing.
Var hinge(const Var& hi, const Var& lo, double offset, Pairing pairing) {
  if (pairing == Pairing::PerSample) return mean(relu(hi - lo + offset));
  return relu(mean(hi) - mean(lo) + offset);
}

}  // namespace

Var margin_loss(const Var& d_fake, const Var& d_real, double epsilon, Pairing pairing) {
  if (pairing == Pairing::PerSample) require_same(d_fake, d_real, "margin_loss");
  if (epsilon < 0.0) throw ShapeError("margin_loss: epsilon must be >= 0");
  return hinge(d_fake, d_real, epsilon, pairing);
}

Var disc_rank_loss(const Var& d_fake_i, const Var& d_fake_prev, Pairing pairing) {
  if (pairing == Pairing::PerSample) require_same(d_fake_i, d_fake_prev, "disc_rank_loss");
  return hinge(d_fake_i, d_fake_prev, 0.0, pairing);
}

Var gen_rank_loss(const Var& d_real, const Var& d_fake_i, Pairing pairing) {
  if (pairing == Pairing::PerSample) require_same(d_real, d_fake_i, "gen_rank_loss");
  return hinge(d_real, d_fake_i, 0.0, pairing);
}

Var gradient_penalty(const Critic& critic, const Tensor& x_real, const Tensor& x_fake, const Tensor& u) {
  if (x_real.shape() != x_fake.shape() || x_real.rank() != 2) {
    throw ShapeError("gradient_penalty: real " + shape_str(x_real.shape()) + " and fake " +
                     shape_str(x_fake.shape()) + " must be equal rank-2 shapes");
  }
  const std::size_t batch = x_real.dim(0);
  if (u.numel() != batch) {
    throw ShapeError("gradient_penalty: need one interpolation weight per sample, got " +
                     shape_str(u.shape()));
  }
  const Tensor weights = u.reshaped({batch, 1});
  const Tensor one_minus = kernels::sub(Tensor::full({batch, 1}, 1.0), weights);
  Var x_hat(kernels::add(kernels::mul(x_real, weights), kernels::mul(x_fake, one_minus)), true);

  Var scores = critic(x_hat);
  Var g = grad(sum(scores), std::span<const Var>(&x_hat, 1), true)[0];
  Var norms = sqrt(sum(square(g), 1));
  return mean(square(norms - 1.0));
}

Var clamp_loss(const Var& d_real, const Var& d_fake_prev, const MarginPair& margins) {
  Var high = relu(margins.high - mean(d_real));
  Var low = relu(mean(d_fake_prev) - margins.low);
  return high + low;
}

Var disc_total_loss(const DiscLossComponents& c, const LossWeights& w) {
  for (const Var* v : {&c.rank, &c.gp, &c.clamp}) {
    if (v->numel() != 1) throw ShapeError("disc_total_loss: components must be scalars");
  }
  return c.rank + c.gp * w.lambda_gp + c.clamp * w.lambda_clamp;
}

BaselineKind parse_baseline_kind(std::string_view name) {
  if (name == "gan") return BaselineKind::Gan;
  if (name == "wgan") return BaselineKind::Wgan;
  if (name == "lsgan") return BaselineKind::Lsgan;
  throw ConfigError("unknown baseline loss kind '" + std::string(name) + "'");
}

Var baseline_loss(BaselineKind kind, const Var& d_real, const Var& d_fake, Role role) {
  if (role == Role::Disc) require_same(d_real, d_fake, "baseline_loss");
  switch (kind) {
    case BaselineKind::Gan:
      if (role == Role::Disc) return mean(softplus(-d_real)) + mean(softplus(d_fake));
      return mean(softplus(-d_fake));
    case BaselineKind::Wgan:
      if (role == Role::Disc) return mean(d_fake) - mean(d_real);
      return -mean(d_fake);
    case BaselineKind::Lsgan:
      if (role == Role::Disc) return (mean(square(d_real - 1.0)) + mean(square(d_fake))) * 0.5;
      return mean(square(d_fake - 1.0)) * 0.5;
  }
  throw ConfigError("baseline_loss: unknown kind");
}

}  // namespace rankgan
