#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

#include "rankgan/checkpoint.hpp"
#include "rankgan/errors.hpp"
#include "rankgan/optim.hpp"
#include "rankgan/stagewise.hpp"

namespace {

using namespace rankgan;

HistoryRow row_with_gap(std::size_t epoch, double gap) {
  HistoryRow r;
  r.epoch = epoch;
  r.mean_d_real = gap;
  return r;
}

TEST(StageShouldTerminate, ConstantGapIsStable) {
  TrainSchedule s;
  std::vector<HistoryRow> h;
  for (std::size_t e = 1; e <= 15; ++e) h.push_back(row_with_gap(e, 0.7));
  const TerminationDecision d = stage_should_terminate(h, s);
  EXPECT_TRUE(d.terminate);
  EXPECT_EQ(d.reason, "stable");
}

TEST(StageShouldTerminate, MaxEpochsWithOscillatingGap) {
  TrainSchedule s;
  s.max_stage_epochs = 20;
  std::vector<HistoryRow> h;
  for (std::size_t e = 1; e <= 20; ++e) h.push_back(row_with_gap(e, e % 2 ? 1.0 : -1.0));
  const TerminationDecision d = stage_should_terminate(h, s);
  EXPECT_TRUE(d.terminate);
  EXPECT_EQ(d.reason, "max-epochs");
}

TEST(StageShouldTerminate, ShortHistoryContinues) {
  TrainSchedule s;
  std::vector<HistoryRow> h;
  for (std::size_t e = 1; e <= 3; ++e) h.push_back(row_with_gap(e, 0.5));
  const TerminationDecision d = stage_should_terminate(h, s);
  EXPECT_FALSE(d.terminate);
  EXPECT_EQ(d.reason, "continue");
}

TEST(StageShouldTerminate, OscillationInsideWindowContinues) {
  TrainSchedule s;
  s.gap_stability_threshold = 0.01;
  std::vector<HistoryRow> h;
  for (std::size_t e = 1; e <= 30; ++e) h.push_back(row_with_gap(e, e % 2 ? 1.0 : 0.9));
  EXPECT_FALSE(stage_should_terminate(h, s).terminate);
}

Mlp frozen(Mlp m) {
  m.params.freeze();
  return m;
}

TEST(ComputeStageMargins, ZeroCriticGivesZeroMargins) {
  const Mlp d = frozen(zero_mlp({{2, 4, 1}}));
  const Mlp g = frozen(zero_mlp({{2, 2}}));
  const MarginPair m = compute_stage_margins(d, g, Tensor::matrix({{1, 2}, {3, 4}}), Tensor::zeros({2, 2}));
  EXPECT_EQ(m.high, 0.0);
  EXPECT_EQ(m.low, 0.0);
}

TEST(ComputeStageMargins, FirstCoordinateCritic) {
  Mlp d = zero_mlp({{2, 1}});
  d.params.mutable_at("layer0.weight") = Tensor::matrix({{1}, {0}});
  Mlp g = zero_mlp({{2, 2}});
  g.params.mutable_at("layer0.bias") = Tensor::vector({2, 0});
  const MarginPair m =
      compute_stage_margins(frozen(d), frozen(g), Tensor::matrix({{1, 0}, {3, 0}}), Tensor::zeros({2, 2}));
  EXPECT_DOUBLE_EQ(m.high, 2.0);
  EXPECT_DOUBLE_EQ(m.low, 2.0);
}

TEST(ComputeStageMargins, RequiresFrozenModels) {
  const Mlp d = zero_mlp({{2, 1}});
  const Mlp g = zero_mlp({{2, 2}});
  EXPECT_THROW(compute_stage_margins(d, frozen(g), Tensor::zeros({2, 2}), Tensor::zeros({2, 2})), std::logic_error);
  EXPECT_THROW(compute_stage_margins(frozen(d), g, Tensor::zeros({2, 2}), Tensor::zeros({2, 2})), std::logic_error);
}

std::string pair_digest_of(const ModelParams& gen, const ModelParams& disc) {
  return params_digest(gen) + ":" + params_digest(disc);
}

PipelineConfig small_config(DatasetKind kind = DatasetKind::Gauss2d) {
  PipelineConfig c;
  c.dataset = kind;
  c.n_samples = 640;
  c.arch.gen_hidden = {16};
  c.arch.disc_hidden = {16};
  c.arch.enc_hidden = {16};
  c.vae_epochs = 3;
  c.warm_start_epochs = 1;
  c.stage1_epochs = 2;
  c.schedule.max_stage_epochs = 3;
  c.eval_samples = 200;
  c.sw_projections = 32;
  c.nstages = 2;
  c.seeds = SeedSet::from_master(0);
  return c;
}

TEST(RunStageZero, VaeReducesValidationError) {
  PipelineConfig c = small_config(DatasetKind::Ring8);
  c.n_samples = 2000;
  c.vae_epochs = 10;
  c.vae_kl_weight = 0.05;
  c.optim.lr_e = 2e-3;
  const Dataset data = make_dataset(c.dataset, c.n_samples, c.seeds.data);
  const StageZeroResult r = run_stage_zero(c, data);
  ASSERT_EQ(r.vae_history.size(), 11u);
  EXPECT_LT(r.vae_history.back().val_mse, r.vae_history.front().val_mse);
  EXPECT_TRUE(r.encoder.params.frozen());
}

TEST(RunStageZero, ZeroVaeEpochsKeepsInitialEncoder) {
  PipelineConfig c = small_config();
  c.vae_epochs = 0;
  const Dataset data = make_dataset(c.dataset, c.n_samples, c.seeds.data);
  const StageZeroResult r = run_stage_zero(c, data);
  Rng init = make_rng(c.seeds.init, "models");
  EXPECT_EQ(r.encoder.params.entries().size(), init_mlp(encoder_spec(c), init).params.entries().size());
  Rng again = make_rng(c.seeds.init, "models");
  const Mlp fresh = init_mlp(encoder_spec(c), again);
  for (std::size_t i = 0; i < fresh.params.size(); ++i) {
    EXPECT_EQ(r.encoder.params.entries()[i].value, fresh.params.entries()[i].value);
  }
  EXPECT_NO_THROW(run_pipeline(c));
}

TEST(RunStageZero, FrozenEncoderRejectsAdam) {
  PipelineConfig c = small_config();
  c.vae_epochs = 1;
  const Dataset data = make_dataset(c.dataset, c.n_samples, c.seeds.data);
  StageZeroResult r = run_stage_zero(c, data);
  GradMap g;
  for (const auto& e : r.encoder.params.entries()) g[e.name] = Tensor::zeros(e.value.shape());
  Adam adam(AdamConfig{});
  EXPECT_THROW(adam.step(r.encoder.params, g), FrozenError);
}

TEST(TrainStage, ZeroEpochsLeavesStateUnchanged) {
  const PipelineConfig c = small_config();
  const Dataset data = make_dataset(c.dataset, c.n_samples, c.seeds.data);
  const StageZeroResult z = run_stage_zero(c, data);
  StageState s = begin_stage(2, z.decoder, z.disc, c, data, &z.encoder);
  const ModelParams gen_before = s.gen.params, disc_before = s.disc.params;
  train_stage(s, c, data, &z.encoder, nullptr, 0);
  EXPECT_EQ(s.epoch, 0u);
  EXPECT_TRUE(s.history.empty());
  EXPECT_EQ(s.counters.critic_steps, 0u);
  EXPECT_EQ(s.termination_reason, "max-epochs");
  EXPECT_TRUE(s.gen.params == gen_before);
  EXPECT_TRUE(s.disc.params == disc_before);
}

TEST(TrainStage, BeginStageClonesAndFreezes) {
  const PipelineConfig c = small_config();
  const Dataset data = make_dataset(c.dataset, c.n_samples, c.seeds.data);
  const StageZeroResult z = run_stage_zero(c, data);
  const StageState s = begin_stage(2, z.decoder, z.disc, c, data, &z.encoder);
  EXPECT_TRUE(s.gen_prev.params.frozen());
  EXPECT_TRUE(s.disc_prev.params.frozen());
  EXPECT_FALSE(s.gen.params.frozen());
  EXPECT_FALSE(s.disc.params.frozen());
  EXPECT_TRUE(s.gen.params == z.decoder.params);
  EXPECT_EQ(s.counters.margin_computations, 1u);
}

TEST(RunPipeline, CountersDigestsAndHistory) {
  const PipelineConfig c = small_config();
  const PipelineResult r = run_pipeline(c);
  ASSERT_EQ(r.stages.size(), 2u);
  const std::size_t batches = (r.data.indices.train.size() + c.schedule.batch_size - 1) / c.schedule.batch_size;
  for (const StageResult& st : r.stages) {
    const StageState& s = st.state;
    EXPECT_EQ(s.counters.margin_computations, 1u);
    EXPECT_EQ(s.counters.critic_steps, s.epoch * batches);
    EXPECT_EQ(s.counters.gen_steps, s.counters.critic_steps / c.schedule.critic_steps_per_gen_step);
    EXPECT_EQ(s.frozen_digest_start, s.frozen_digest_end);
    for (std::size_t i = 0; i < s.history.size(); ++i) EXPECT_EQ(s.history[i].epoch, i + 1);
  }
  EXPECT_EQ(r.stages[0].state.frozen_digest_start,
            pair_digest_of(r.stage_zero.decoder.params, r.stage_zero.disc.params));
  EXPECT_EQ(r.stages[1].state.frozen_digest_start,
            pair_digest_of(r.stages[0].state.gen.params, r.stages[0].state.disc.params));
  EXPECT_TRUE(r.stages[1].state.gen_prev.params.clone() == r.stages[0].state.gen.params);
}

TEST(RunPipeline, SingleStageWithoutAdversarialTrainingIsVaeOnly) {
  PipelineConfig c = small_config();
  c.nstages = 1;
  c.stage1_adversarial = false;
  const PipelineResult r = run_pipeline(c);
  ASSERT_EQ(r.stages.size(), 1u);
  EXPECT_EQ(r.stages[0].state.termination_reason, "vae-only");
  EXPECT_TRUE(r.stages[0].state.gen.params == r.stage_zero.decoder.params);
  EXPECT_EQ(r.stages[0].state.counters.critic_steps, 0u);
}

TEST(RunPipeline, SameSeedSameHistory) {
  const PipelineConfig c = small_config();
  const PipelineResult a = run_pipeline(c), b = run_pipeline(c);
  for (std::size_t i = 0; i < a.stages.size(); ++i) {
    const auto& ha = a.stages[i].state.history;
    const auto& hb = b.stages[i].state.history;
    ASSERT_EQ(ha.size(), hb.size());
    for (std::size_t k = 0; k < ha.size(); ++k) {
      EXPECT_EQ(ha[k].mean_d_real, hb[k].mean_d_real);
      EXPECT_EQ(ha[k].loss_disc, hb[k].loss_disc);
      EXPECT_EQ(ha[k].loss_gen, hb[k].loss_gen);
    }
    EXPECT_TRUE(a.stages[i].state.gen.params == b.stages[i].state.gen.params);
  }
}

// Locked-seed run on the two-Gaussian data: 30 epochs of ranking training.
PipelineConfig gauss2d_ordering_config() {
  PipelineConfig c;
  c.dataset = DatasetKind::Gauss2d;
  c.n_samples = 2000;
  c.arch.gen_hidden = {32, 32};
  c.arch.disc_hidden = {32, 32};
  c.arch.enc_hidden = {32};
  c.encoder_mode = EncoderMode::SampleAgnostic;
  c.optim.lr_d = 3e-3;
  c.optim.lr_g = 1e-5;
  c.optim.lr_e = 2e-3;
  c.vae_kl_weight = 0.05;
  c.vae_epochs = 10;
  c.warm_start_epochs = 5;
  c.stage1_epochs = 10;
  c.schedule.max_stage_epochs = 30;
  c.schedule.gap_stability_threshold = 0.0;
  c.nstages = 2;
  c.eval_samples = 500;
  c.sw_projections = 64;
  c.seeds = SeedSet::from_master(0);
  return c;
}

TEST(RunPipeline, Gauss2dOrderingAndClampsAfterThirtyEpochs) {
  const PipelineResult r = run_pipeline(gauss2d_ordering_config());
  const StageState& s = r.stages[1].state;
  ASSERT_EQ(s.epoch, 30u);
  EXPECT_GT(s.margins.high, s.margins.low);
  const HistoryRow& last = s.history.back();
  EXPECT_GE(last.mean_d_real, last.mean_d_fake_i - 0.1);
  EXPECT_GE(last.mean_d_fake_i, last.mean_d_fake_prev - 0.1);
  for (const HistoryRow& h : s.history) {
    if (h.epoch <= 10) continue;
    EXPECT_LT(std::abs(h.mean_d_real - s.margins.high), 0.5) << h.epoch;
    EXPECT_LT(std::abs(h.mean_d_fake_prev - s.margins.low), 0.5) << h.epoch;
  }
}

}  // namespace
