#pragma once

// Stage-wise ranking GAN training.
//
// Stage 1 trains a VAE (encoder E, decoder = G_1), freezes E, and warm-starts
// D_1 with the WGAN critic loss plus gradient penalty. Optionally G_1 is then
// trained adversarially against D_1 with the margin loss.
//
// Stage i >= 2 clones (G_{i-1}, D_{i-1}) into (G_i, D_i), freezes the
// originals, measures the margins
//   m_high = E[D_{i-1}(x_val)],  m_low = E[D_{i-1}(G_{i-1}(z))]
// once, then alternates `critic_steps_per_gen_step` critic updates on
//   L_disc = L_disc_rank + lambda_gp L_gp + lambda_clamp L_clamp
// with one generator update on L_gen_rank until the stage terminates.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rankgan/data.hpp"
#include "rankgan/losses.hpp"
#include "rankgan/nn.hpp"
#include "rankgan/optim.hpp"
#include "rankgan/rng.hpp"

namespace rankgan {

enum class EncoderMode { SampleAware, SampleAgnostic };
enum class LossKind { RankGan, Margin, Wgan, Lsgan, Gan };

EncoderMode parse_encoder_mode(std::string_view name);
std::string_view to_string(EncoderMode mode);
LossKind parse_loss_kind(std::string_view name);
std::string_view to_string(LossKind kind);

struct TrainSchedule {
  std::size_t critic_steps_per_gen_step = 5;
  std::size_t max_stage_epochs = 200;
  std::size_t gap_stability_window = 15;
  // Unset: 2% of the first recorded gap of the stage.
  std::optional<double> gap_stability_threshold;
  std::size_t batch_size = 64;

  void validate() const;
};

struct OptimizerSettings {
  double lr_d = 5e-5;
  double lr_g = 5e-5;
  double lr_e = 1e-4;
  double beta1 = 0.0;
  double beta2 = 0.99;
  double eps = 1e-8;

  AdamConfig adam(double lr) const { return {lr, beta1, beta2, eps}; }
};

struct ArchitectureConfig {
  std::size_t latent_dim = 2;
  std::vector<std::size_t> gen_hidden{64, 64};
  std::vector<std::size_t> disc_hidden{64, 64};
  std::vector<std::size_t> enc_hidden{64};
  double leaky_slope = 0.2;
};

// Named sub-seeds; each stream is independent of the others.
struct SeedSet {
  std::uint64_t data = 0;
  std::uint64_t init = 0;
  std::uint64_t training = 0;
  std::uint64_t completion = 0;

  static SeedSet from_master(std::uint64_t seed);
};

struct PipelineConfig {
  DatasetKind dataset = DatasetKind::Ring8;
  std::size_t n_samples = 4000;
  ArchitectureConfig arch;
  std::size_t nstages = 3;
  LossKind loss = LossKind::RankGan;
  LossWeights weights;
  TrainSchedule schedule;
  OptimizerSettings optim;
  EncoderMode encoder_mode = EncoderMode::SampleAware;
  std::size_t vae_epochs = 20;
  double vae_kl_weight = 1.0;
  std::size_t warm_start_epochs = 1;
  bool stage1_adversarial = true;
  std::optional<std::size_t> stage1_epochs;  // unset: schedule.max_stage_epochs
  std::size_t eval_samples = 2000;
  std::size_t sw_projections = 256;
  SeedSet seeds;
  bool record_wall_time = false;

  void validate() const;
};

MlpSpec generator_spec(const PipelineConfig& cfg);
MlpSpec discriminator_spec(const PipelineConfig& cfg);
MlpSpec encoder_spec(const PipelineConfig& cfg);

struct HistoryRow {
  std::size_t stage = 0;
  std::size_t epoch = 0;
  double mean_d_real = 0.0;
  double mean_d_fake_i = 0.0;
  double mean_d_fake_prev = 0.0;
  double loss_disc = 0.0;
  double loss_gen = 0.0;
  double gp = 0.0;
  double clamp = 0.0;
  double wall_ms = 0.0;

  double gap() const noexcept { return mean_d_real - mean_d_fake_i; }
};

struct StageCounters {
  std::size_t critic_steps = 0;
  std::size_t gen_steps = 0;
  std::size_t margin_computations = 0;
};

struct StageState {
  std::size_t index = 1;
  Mlp gen;
  Mlp disc;
  Mlp gen_prev;   // frozen
  Mlp disc_prev;  // frozen
  MarginPair margins;
  std::size_t epoch = 0;
  std::vector<HistoryRow> history;
  StageCounters counters;
  std::string termination_reason;
  std::string frozen_digest_start;
  std::string frozen_digest_end;
};

struct TerminationDecision {
  bool terminate = false;
  std::string reason;  // "max-epochs", "stable" or "continue"
};

TerminationDecision stage_should_terminate(std::span<const HistoryRow> history, const TrainSchedule& schedule);

// Latent codes for the rows of `x`: encoder posterior draws in sample-aware
// mode (needs `encoder`), standard normal draws otherwise.
Tensor draw_latents(const Tensor& x, const Mlp* encoder, EncoderMode mode, std::size_t latent_dim, Rng& rng);

// Fixed validation latents, shared by the margins and history rows of every
// stage so stage-to-stage comparisons are paired.
Tensor eval_latents(const PipelineConfig& cfg, const Tensor& x_val, const Mlp* encoder);

// Means of D_prev over x_val and over G_prev(z). Both models must be frozen.
MarginPair compute_stage_margins(const Mlp& disc_prev, const Mlp& gen_prev, const Tensor& x_val,
                                 const Tensor& z);

struct VaeEpoch {
  std::size_t epoch = 0;  // 0 = before training
  double train_loss = 0.0;
  double val_mse = 0.0;
};

struct StageZeroResult {
  Mlp encoder;  // frozen
  Mlp decoder;
  Mlp disc;
  std::vector<VaeEpoch> vae_history;
};


class PipelineObserver;

StageZeroResult run_stage_zero(const PipelineConfig& cfg, const Dataset& data, PipelineObserver* observer = nullptr);

// Clones (gen, disc) into a new stage, freezes the originals and measures the
// margins once.
StageState begin_stage(std::size_t index, const Mlp& gen, const Mlp& disc, const PipelineConfig& cfg,
                       const Dataset& data, const Mlp* encoder);

// Runs epochs until stage_should_terminate says stop; `epochs` overrides
// schedule.max_stage_epochs. Throws NumericError with stage/epoch/step context.
void train_stage(StageState& state, const PipelineConfig& cfg, const Dataset& data, const Mlp* encoder,
                 PipelineObserver* observer = nullptr, std::optional<std::size_t> epochs = std::nullopt);

struct StageMetrics {
  double sliced_wasserstein = 0.0;
  std::optional<double> mode_coverage;  // ring8 / gauss2d only
};

struct StageResult {
  StageState state;
  StageMetrics metrics;
};

class PipelineObserver {
 public:
  virtual ~PipelineObserver() = default;
  virtual void on_vae_epoch(const VaeEpoch&) {}
  virtual void on_stage_zero(const Dataset&, const StageZeroResult&) {}
  virtual void on_stage_begin(const StageState&) {}
  virtual void on_epoch(const HistoryRow&) {}
  virtual void on_stage_end(const StageState&, const StageMetrics&) {}
};

struct PipelineResult {
  Dataset data;
  StageZeroResult stage_zero;
  std::vector<StageResult> stages;
};

// Samples of G for evaluation: eval_samples fresh real draws pushed through
// the latent source of the configured encoder mode.
Tensor generate_eval_samples(const PipelineConfig& cfg, const Mlp& gen, const Mlp* encoder);
StageMetrics evaluate_stage(const PipelineConfig& cfg, const Mlp& gen, const Mlp* encoder);

PipelineResult run_pipeline(const PipelineConfig& cfg, PipelineObserver* observer = nullptr);

}  // namespace rankgan
