#include "rankgan/stagewise.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include <spdlog/spdlog.h>

#include "rankgan/checkpoint.hpp"
#include "rankgan/errors.hpp"
#include "rankgan/metrics.hpp"

namespace rankgan {

EncoderMode parse_encoder_mode(std::string_view name) {
  if (name == "sample-aware") return EncoderMode::SampleAware;
  if (name == "sample-agnostic") return EncoderMode::SampleAgnostic;
  throw ConfigError("unknown encoder mode '" + std::string(name) + "'");
}

std::string_view to_string(EncoderMode mode) {
  return mode == EncoderMode::SampleAware ? "sample-aware" : "sample-agnostic";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "rankgan") return LossKind::RankGan;
  if (name == "margin") return LossKind::Margin;
  if (name == "wgan") return LossKind::Wgan;
  if (name == "lsgan") return LossKind::Lsgan;
  if (name == "gan") return LossKind::Gan;
  throw ConfigError("unknown loss '" + std::string(name) + "'");
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::RankGan: return "rankgan";
    case LossKind::Margin: return "margin";
    case LossKind::Wgan: return "wgan";
    case LossKind::Lsgan: return "lsgan";
    case LossKind::Gan: return "gan";
  }
  return "?";
}

void TrainSchedule::validate() const {
  if (critic_steps_per_gen_step == 0) throw ConfigError("schedule: critic_steps_per_gen_step must be >= 1");
  if (gap_stability_window < 2) throw ConfigError("schedule: gap_stability_window must be >= 2");
  if (gap_stability_threshold && !(*gap_stability_threshold >= 0.0)) {
    throw ConfigError("schedule: gap_stability_threshold must be >= 0");
  }
  if (batch_size == 0) throw ConfigError("schedule: batch_size must be >= 1");
}

SeedSet SeedSet::from_master(std::uint64_t seed) {
  return {derive_seed(seed, "data"), derive_seed(seed, "init"), derive_seed(seed, "training"),
          derive_seed(seed, "completion")};
}

void PipelineConfig::validate() const {
  schedule.validate();
  if (nstages == 0) throw ConfigError("nstages must be >= 1");
  if (n_samples < 20) throw ConfigError("dataset.n must be >= 20");
  if (arch.latent_dim == 0) throw ConfigError("model.latent_dim must be >= 1");
  for (double lr : {optim.lr_d, optim.lr_g, optim.lr_e}) {
    if (!(lr > 0.0)) throw ConfigError("optimizer: learning rates must be positive");
  }
  if (!(optim.beta1 >= 0.0 && optim.beta1 < 1.0) || !(optim.beta2 >= 0.0 && optim.beta2 < 1.0)) {
    throw ConfigError("optimizer: betas must lie in [0, 1)");
  }
  if (!(weights.lambda_gp >= 0.0) || !(weights.lambda_clamp >= 0.0) || !(weights.epsilon_margin >= 0.0)) {
    throw ConfigError("loss_weights: values must be >= 0");
  }
  if (!(vae_kl_weight >= 0.0)) throw ConfigError("vae_kl_weight must be >= 0");
  if (eval_samples == 0) throw ConfigError("metrics.eval_samples must be >= 1");
  if (sw_projections == 0) throw ConfigError("metrics.n_proj must be >= 1");
  generator_spec(*this).validate();
  discriminator_spec(*this).validate();
  encoder_spec(*this).validate();
}

namespace {

std::vector<std::size_t> with_ends(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

}  // namespace

MlpSpec generator_spec(const PipelineConfig& cfg) {
  MlpSpec s;
  s.widths = with_ends(cfg.arch.latent_dim, cfg.arch.gen_hidden, data_dim(cfg.dataset));
  s.slope = cfg.arch.leaky_slope;
  s.output = cfg.dataset == DatasetKind::ToyFaces ? OutputActivation::Tanh : OutputActivation::Identity;
  return s;
}

MlpSpec discriminator_spec(const PipelineConfig& cfg) {
  MlpSpec s;
  s.widths = with_ends(data_dim(cfg.dataset), cfg.arch.disc_hidden, 1);
  s.slope = cfg.arch.leaky_slope;
  return s;
}

MlpSpec encoder_spec(const PipelineConfig& cfg) {
  MlpSpec s;
  s.widths = with_ends(data_dim(cfg.dataset), cfg.arch.enc_hidden, 2 * cfg.arch.latent_dim);
  s.slope = cfg.arch.leaky_slope;
  return s;
}

TerminationDecision stage_should_terminate(std::span<const HistoryRow> history, const TrainSchedule& schedule) {
  if (history.empty()) {
    if (schedule.max_stage_epochs == 0) return {true, "max-epochs"};
    return {false, "continue"};
  }
  if (history.back().epoch >= schedule.max_stage_epochs) return {true, "max-epochs"};
  const std::size_t w = schedule.gap_stability_window;
  if (history.size() < w) return {false, "continue"};
  const double threshold = schedule.gap_stability_threshold.value_or(0.02 * std::fabs(history.front().gap()));
  double m = 0.0;
  for (std::size_t i = history.size() - w; i < history.size(); ++i) m += history[i].gap();
  m /= static_cast<double>(w);
  double v = 0.0;
  for (std::size_t i = history.size() - w; i < history.size(); ++i) {
    v += (history[i].gap() - m) * (history[i].gap() - m);
  }
  const double sd = std::sqrt(v / static_cast<double>(w));
  if (sd < threshold) return {true, "stable"};
  return {false, "continue"};
}

Tensor draw_latents(const Tensor& x, const Mlp* encoder, EncoderMode mode, std::size_t latent_dim, Rng& rng) {
  const std::size_t n = x.dim(0);
  Tensor noise = standard_normal({n, latent_dim}, rng);
  if (mode == EncoderMode::SampleAgnostic) return noise;
  if (encoder == nullptr) throw ConfigError("sample-aware latents need an encoder");
  NoGradGuard no_grad;
  const EncoderOutput enc = encoder_forward(*encoder, x);
  if (enc.mu.shape() != noise.shape()) {
    throw ShapeError("draw_latents: encoder produces " + shape_str(enc.mu.shape()) + ", expected " +
                     shape_str(noise.shape()));
  }
  return sample_latent(enc, Var(noise)).value();
}

Tensor eval_latents(const PipelineConfig& cfg, const Tensor& x_val, const Mlp* encoder) {
  Rng rng = make_rng(cfg.seeds.training, "eval-latents");
  return draw_latents(x_val, encoder, cfg.encoder_mode, cfg.arch.latent_dim, rng);
}

namespace {

double mean_value(const Tensor& t) {
  return std::accumulate(t.data().begin(), t.data().end(), 0.0) / static_cast<double>(t.numel());
}

std::string pair_digest(const Mlp& gen, const Mlp& disc) {
  return params_digest(gen.params) + ":" + params_digest(disc.params);
}

void require_finite(const Var& v, const char* component, const NumericContext& where) {
  if (!v.value().all_finite()) {
    NumericContext ctx = where;
    ctx.component = component;
    std::string msg = std::string(component) + " became non-finite";
    if (ctx.stage) msg += " (stage " + std::to_string(*ctx.stage);
    if (ctx.epoch) msg += ", epoch " + std::to_string(*ctx.epoch);
    if (ctx.step) msg += ", step " + std::to_string(*ctx.step);
    if (ctx.stage) msg += ")";
    throw NumericError(msg, ctx);
  }
}

// Rethrows a NumericError from the autodiff engine with training context.
template <typename F>
auto with_context(const NumericContext& where, const char* component, F&& f) {
  try {
    return f();
  } catch (const NumericError& e) {
    NumericContext ctx = where;
    ctx.component = component;
    throw NumericError(std::string(component) + ": " + e.what(), ctx);
  }
}

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < n; b += batch) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + batch)));
  }
  return out;
}

Pairing pairing_for(EncoderMode mode) {
  return mode == EncoderMode::SampleAware ? Pairing::PerSample : Pairing::BatchMean;
}

bool uses_ranking(const PipelineConfig& cfg, std::size_t stage) {
  return cfg.loss == LossKind::RankGan && stage >= 2;
}

bool uses_margin(const PipelineConfig& cfg) {
  return cfg.loss == LossKind::RankGan || cfg.loss == LossKind::Margin;
}

BaselineKind baseline_of(LossKind kind) {
  switch (kind) {
    case LossKind::Gan: return BaselineKind::Gan;
    case LossKind::Lsgan: return BaselineKind::Lsgan;
    default: return BaselineKind::Wgan;
  }
}

struct StepLosses {
  double disc = 0.0;
  double gp = 0.0;
  double clamp = 0.0;
};

StepLosses critic_step(StageState& s, const PipelineConfig& cfg, Adam& adam, const Tensor& x, const Tensor& z,
                       const Tensor& z_prev, Rng& rng, const NumericContext& where) {
  Tensor fake_i, fake_prev;
  {
    NoGradGuard no_grad;
    fake_i = mlp_forward(s.gen, z);
    fake_prev = mlp_forward(s.gen_prev, z_prev);
  }
  BoundParams dp(s.disc.params, true);
  const Critic critic = [&](const Var& in) { return mlp_forward(s.disc.spec, dp.vars(), in); };
  const Pairing pairing = pairing_for(cfg.encoder_mode);
  const LossWeights& w = cfg.weights;

  const Var d_real = critic(Var(x));
  const Var d_fake = critic(Var(fake_i));
  const Tensor u = uniform({x.dim(0)}, 0.0, 1.0, rng);

  StepLosses out;
  Var total;
  if (uses_ranking(cfg, s.index)) {
    const Var d_prev = critic(Var(fake_prev));
    DiscLossComponents c;
    c.rank = disc_rank_loss(d_fake, d_prev, pairing);
    c.gp = with_context(where, "gradient penalty", [&] { return gradient_penalty(critic, x, fake_i, u); });
    c.clamp = clamp_loss(d_real, d_prev, s.margins);
    total = disc_total_loss(c, w);
    out.gp = c.gp.item();
    out.clamp = c.clamp.item();
  } else if (uses_margin(cfg)) {
    const Var gp = with_context(where, "gradient penalty", [&] { return gradient_penalty(critic, x, fake_i, u); });
    total = margin_loss(d_fake, d_real, w.epsilon_margin, pairing) + w.lambda_gp * gp;
    out.gp = gp.item();
  } else {
    total = baseline_loss(baseline_of(cfg.loss), d_real, d_fake, Role::Disc);
    if (cfg.loss == LossKind::Wgan) {
      const Var gp = with_context(where, "gradient penalty", [&] { return gradient_penalty(critic, x, fake_i, u); });
      total = total + w.lambda_gp * gp;
      out.gp = gp.item();
    }
  }
  require_finite(total, "critic loss", where);
  const GradMap grads = with_context(where, "critic backward", [&] { return dp.grads(total); });
  adam.step(s.disc.params, grads);
  out.disc = total.item();
  return out;
}

double generator_step(StageState& s, const PipelineConfig& cfg, Adam& adam, const Tensor& x, const Tensor& z,
                      const NumericContext& where) {
  BoundParams gp(s.gen.params, true);
  const BoundParams dc(s.disc.params, false);
  const Var fake = mlp_forward(s.gen.spec, gp.vars(), Var(z));
  const Var d_fake = mlp_forward(s.disc.spec, dc.vars(), fake);
  Var loss;
  if (uses_margin(cfg)) {
    const Var d_real(mlp_forward(s.disc, x));
    loss = gen_rank_loss(d_real, d_fake, pairing_for(cfg.encoder_mode));
  } else {
    loss = baseline_loss(baseline_of(cfg.loss), d_fake, d_fake, Role::Gen);
  }
  require_finite(loss, "generator loss", where);
  const GradMap grads = with_context(where, "generator backward", [&] { return gp.grads(loss); });
  adam.step(s.gen.params, grads);
  return loss.item();
}

HistoryRow evaluate_row(const StageState& s, const Tensor& x_val, const Tensor& z_val) {
  HistoryRow row;
  row.stage = s.index;
  row.epoch = s.epoch;
  row.mean_d_real = mean_value(mlp_forward(s.disc, x_val));
  row.mean_d_fake_i = mean_value(mlp_forward(s.disc, mlp_forward(s.gen, z_val)));
  row.mean_d_fake_prev = mean_value(mlp_forward(s.disc, mlp_forward(s.gen_prev, z_val)));
  return row;
}

}  // namespace

MarginPair compute_stage_margins(const Mlp& disc_prev, const Mlp& gen_prev, const Tensor& x_val,
                                 const Tensor& z) {
  if (!disc_prev.params.frozen() || !gen_prev.params.frozen()) {
    throw std::logic_error("compute_stage_margins: previous-stage models must be frozen");
  }
  NoGradGuard no_grad;
  MarginPair m;
  m.high = mean_value(mlp_forward(disc_prev, x_val));
  m.low = mean_value(mlp_forward(disc_prev, mlp_forward(gen_prev, z)));
  return m;
}

StageZeroResult run_stage_zero(const PipelineConfig& cfg, const Dataset& data, PipelineObserver* observer) {
  Rng init = make_rng(cfg.seeds.init, "models");
  StageZeroResult out;
  out.encoder = init_mlp(encoder_spec(cfg), init);
  out.decoder = init_mlp(generator_spec(cfg), init);
  out.disc = init_mlp(discriminator_spec(cfg), init);

  Rng rng = make_rng(cfg.seeds.training, "stage-0");
  const Tensor train_x = data.train();
  const Tensor x_val = data.val();
  const std::size_t latent = cfg.arch.latent_dim;

  auto val_mse = [&] {
    const EncoderOutput enc = encoder_forward(out.encoder, x_val);
    const Tensor recon = mlp_forward(out.decoder, enc.mu.value());
    double s = 0.0;
    for (std::size_t i = 0; i < recon.numel(); ++i) s += (recon[i] - x_val[i]) * (recon[i] - x_val[i]);
    return s / static_cast<double>(recon.numel());
  };

  VaeEpoch before{0, 0.0, val_mse()};
  out.vae_history.push_back(before);
  if (observer) observer->on_vae_epoch(before);

  Adam adam_e(cfg.optim.adam(cfg.optim.lr_e));
  Adam adam_dec(cfg.optim.adam(cfg.optim.lr_e));
  for (std::size_t epoch = 1; epoch <= cfg.vae_epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t step = 0;
    for (const auto& batch : shuffled_batches(train_x.dim(0), cfg.schedule.batch_size, rng)) {
      const NumericContext where{0, epoch, step++, ""};
      const Tensor x = gather_rows(train_x, batch);
      BoundParams ep(out.encoder.params, true);
      BoundParams dp(out.decoder.params, true);
      const Var xv(x);
      const EncoderOutput enc = encoder_forward(out.encoder.spec, ep.vars(), xv);
      const Var z = sample_latent(enc, Var(standard_normal({x.dim(0), latent}, rng)));
      const Var recon = mlp_forward(out.decoder.spec, dp.vars(), z);
      const Var loss = vae_loss(xv, recon, enc, cfg.vae_kl_weight);
      require_finite(loss, "vae loss", where);
      const GradMap ge = with_context(where, "vae backward", [&] { return ep.grads(loss); });
      const GradMap gd = with_context(where, "vae backward", [&] { return dp.grads(loss); });
      adam_e.step(out.encoder.params, ge);
      adam_dec.step(out.decoder.params, gd);
      loss_sum += loss.item();
    }
    VaeEpoch row{epoch, loss_sum / static_cast<double>(std::max<std::size_t>(step, 1)), val_mse()};
    out.vae_history.push_back(row);
    if (observer) observer->on_vae_epoch(row);
    spdlog::debug("vae epoch {} loss {:.6f} val_mse {:.6f}", epoch, row.train_loss, row.val_mse);
  }
  out.encoder.params.freeze();

  // Critic warm start against the VAE decoder.
  Adam adam_d(cfg.optim.adam(cfg.optim.lr_d));
  for (std::size_t epoch = 1; epoch <= cfg.warm_start_epochs; ++epoch) {
    std::size_t step = 0;
    for (const auto& batch : shuffled_batches(train_x.dim(0), cfg.schedule.batch_size, rng)) {
      const NumericContext where{0, epoch, step++, ""};
      const Tensor x = gather_rows(train_x, batch);
      const Tensor z = draw_latents(x, &out.encoder, cfg.encoder_mode, latent, rng);
      const Tensor fake = mlp_forward(out.decoder, z);
      BoundParams dp(out.disc.params, true);
      const Critic critic = [&](const Var& in) { return mlp_forward(out.disc.spec, dp.vars(), in); };
      const Tensor u = uniform({x.dim(0)}, 0.0, 1.0, rng);
      const Var gp = with_context(where, "gradient penalty", [&] { return gradient_penalty(critic, x, fake, u); });
      const Var loss = baseline_loss(BaselineKind::Wgan, critic(Var(x)), critic(Var(fake)), Role::Disc) +
                       cfg.weights.lambda_gp * gp;
      require_finite(loss, "warm-start critic loss", where);
      const GradMap g = with_context(where, "critic backward", [&] { return dp.grads(loss); });
      adam_d.step(out.disc.params, g);
    }
  }
  return out;
}

StageState begin_stage(std::size_t index, const Mlp& gen, const Mlp& disc, const PipelineConfig& cfg,
                       const Dataset& data, const Mlp* encoder) {
  StageState s;
  s.index = index;
  s.gen_prev = gen;
  s.gen_prev.params.freeze();
  s.disc_prev = disc;
  s.disc_prev.params.freeze();
  s.gen = Mlp{gen.spec, gen.params.clone()};
  s.disc = Mlp{disc.spec, disc.params.clone()};
  const Tensor x_val = data.val();
  s.margins = compute_stage_margins(s.disc_prev, s.gen_prev, x_val, eval_latents(cfg, x_val, encoder));
  s.counters.margin_computations = 1;
  s.frozen_digest_start = pair_digest(s.gen_prev, s.disc_prev);
  s.frozen_digest_end = s.frozen_digest_start;
  return s;
}

void train_stage(StageState& s, const PipelineConfig& cfg, const Dataset& data, const Mlp* encoder,
                 PipelineObserver* observer, std::optional<std::size_t> epochs) {
  TrainSchedule sched = cfg.schedule;
  if (epochs) sched.max_stage_epochs = *epochs;

  Adam adam_d(cfg.optim.adam(cfg.optim.lr_d));
  Adam adam_g(cfg.optim.adam(cfg.optim.lr_g));
  Rng rng = make_rng(cfg.seeds.training, "stage-" + std::to_string(s.index));
  const Tensor train_x = data.train();
  const Tensor x_val = data.val();
  const Tensor z_val = eval_latents(cfg, x_val, encoder);
  const std::size_t latent = cfg.arch.latent_dim;

  std::size_t pending = 0;  // critic steps since the last generator step
  while (true) {
    if (s.epoch >= sched.max_stage_epochs) {
      s.termination_reason = "max-epochs";
      break;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t epoch = s.epoch + 1;
    double sum_disc = 0.0, sum_gen = 0.0, sum_gp = 0.0, sum_clamp = 0.0;
    std::size_t n_disc = 0, n_gen = 0, step = 0;
    for (const auto& batch : shuffled_batches(train_x.dim(0), sched.batch_size, rng)) {
      const NumericContext where{s.index, epoch, step++, ""};
      const Tensor x = gather_rows(train_x, batch);
      const Tensor z = draw_latents(x, encoder, cfg.encoder_mode, latent, rng);
      const Tensor z_prev =
          cfg.encoder_mode == EncoderMode::SampleAware ? z : standard_normal({x.dim(0), latent}, rng);
      const StepLosses l = critic_step(s, cfg, adam_d, x, z, z_prev, rng, where);
      sum_disc += l.disc;
      sum_gp += l.gp;
      sum_clamp += l.clamp;
      ++n_disc;
      ++s.counters.critic_steps;
      if (++pending == sched.critic_steps_per_gen_step) {
        sum_gen += generator_step(s, cfg, adam_g, x, z, where);
        ++n_gen;
        ++s.counters.gen_steps;
        pending = 0;
      }
    }
    s.epoch = epoch;
    HistoryRow row = evaluate_row(s, x_val, z_val);
    row.loss_disc = n_disc ? sum_disc / static_cast<double>(n_disc) : 0.0;
    row.gp = n_disc ? sum_gp / static_cast<double>(n_disc) : 0.0;
    row.clamp = n_disc ? sum_clamp / static_cast<double>(n_disc) : 0.0;
    row.loss_gen = n_gen ? sum_gen / static_cast<double>(n_gen) : 0.0;
    if (cfg.record_wall_time) {
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    s.history.push_back(row);
    if (observer) observer->on_epoch(row);
    if (spdlog::should_log(spdlog::level::debug)) {
      const StageMetrics m = evaluate_stage(cfg, s.gen, encoder);
      spdlog::debug("stage {} epoch {} d_real {:.4f} d_fake {:.4f} d_prev {:.4f} loss_d {:.4f} loss_g {:.4f} sw {:.4f}",
                    s.index, epoch, row.mean_d_real, row.mean_d_fake_i, row.mean_d_fake_prev, row.loss_disc,
                    row.loss_gen, m.sliced_wasserstein);
    }

    const TerminationDecision d = stage_should_terminate(s.history, sched);
    if (d.terminate) {
      s.termination_reason = d.reason;
      break;
    }
  }

  s.frozen_digest_end = pair_digest(s.gen_prev, s.disc_prev);
  if (s.frozen_digest_end != s.frozen_digest_start) {
    throw std::logic_error("stage " + std::to_string(s.index) + ": frozen previous-stage models changed");
  }
}

Tensor generate_eval_samples(const PipelineConfig& cfg, const Mlp& gen, const Mlp* encoder) {
  const Tensor source = sample_real(cfg.dataset, cfg.eval_samples, derive_seed(cfg.seeds.data, "eval-source"));
  Rng rng = make_rng(cfg.seeds.training, "eval-generate");
  const Tensor z = draw_latents(source, encoder, cfg.encoder_mode, cfg.arch.latent_dim, rng);
  return mlp_forward(gen, z);
}

StageMetrics evaluate_stage(const PipelineConfig& cfg, const Mlp& gen, const Mlp* encoder) {
  const Tensor real = sample_real(cfg.dataset, cfg.eval_samples, derive_seed(cfg.seeds.data, "eval-real"));
  const Tensor fake = generate_eval_samples(cfg, gen, encoder);
  StageMetrics m;
  m.sliced_wasserstein = sliced_wasserstein(fake, real, cfg.sw_projections, derive_seed(cfg.seeds.data, "sw"));
  if (cfg.dataset == DatasetKind::Ring8) {
    m.mode_coverage = mode_coverage(fake, ring8_centres(), 3.0 * kRingStd);
  } else if (cfg.dataset == DatasetKind::Gauss2d) {
    const std::vector<std::pair<double, double>> centres{{-1.0, 0.0}, {1.0, 0.0}};
    m.mode_coverage = mode_coverage(fake, centres, 0.3);
  }
  return m;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, PipelineObserver* observer) {
  cfg.validate();
  PipelineResult out;
  out.data = make_dataset(cfg.dataset, cfg.n_samples, cfg.seeds.data);
  out.stage_zero = run_stage_zero(cfg, out.data, observer);
  const Mlp* encoder = &out.stage_zero.encoder;
  if (observer) observer->on_stage_zero(out.data, out.stage_zero);

  const Mlp* gen = &out.stage_zero.decoder;
  const Mlp* disc = &out.stage_zero.disc;
  for (std::size_t i = 1; i <= cfg.nstages; ++i) {
    StageResult r;
    r.state = begin_stage(i, *gen, *disc, cfg, out.data, encoder);
    if (observer) observer->on_stage_begin(r.state);
    if (i > 1 || cfg.stage1_adversarial) {
      const std::optional<std::size_t> epochs = i == 1 ? cfg.stage1_epochs : std::nullopt;
      train_stage(r.state, cfg, out.data, encoder, observer, epochs);
    } else {
      r.state.termination_reason = "vae-only";
    }
    r.metrics = evaluate_stage(cfg, r.state.gen, encoder);
    spdlog::info("stage {} done after {} epochs ({}), sliced W1 {:.5f}", i, r.state.epoch,
                 r.state.termination_reason, r.metrics.sliced_wasserstein);
    if (observer) observer->on_stage_end(r.state, r.metrics);
    out.stages.push_back(std::move(r));
    gen = &out.stages.back().state.gen;
    disc = &out.stages.back().state.disc;
  }
  return out;
}

}  // namespace rankgan
