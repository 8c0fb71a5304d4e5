#include "rankgan/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <type_traits>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "rankgan/checkpoint.hpp"
#include "rankgan/errors.hpp"
#include "rankgan/metrics.hpp"

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "config integers are read as uint64");

namespace rankgan {

using nlohmann::json;

ExperimentKind parse_experiment_kind(std::string_view name) {
  if (name == "pipeline") return ExperimentKind::Pipeline;
  if (name == "fig2-scores") return ExperimentKind::Fig2Scores;
  if (name == "completion") return ExperimentKind::Completion;
  if (name == "metrics-only") return ExperimentKind::MetricsOnly;
  throw ConfigError("unknown experiment kind '" + std::string(name) + "'");
}

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Pipeline: return "pipeline";
    case ExperimentKind::Fig2Scores: return "fig2-scores";
    case ExperimentKind::Completion: return "completion";
    case ExperimentKind::MetricsOnly: return "metrics-only";
  }
  return "?";
}

std::size_t Fig2Config::grid_size() const {
  return static_cast<std::size_t>(std::llround((x_max - x_min) / x_step)) + 1;
}

void Fig2Config::validate() const {
  if (n_samples < 2 || steps == 0 || batch_size == 0) throw ConfigError("fig2: n_samples, steps and batch_size must be positive");
  if (!(lr > 0.0)) throw ConfigError("fig2: lr must be positive");
  if (!(x_step > 0.0) || !(x_max > x_min)) throw ConfigError("fig2: grid must satisfy x_min < x_max, x_step > 0");
}

void ExperimentConfig::validate() const {
  pipeline.validate();
  fig2.validate();
  completion.search.validate();
  if (jobs == 0) throw ConfigError("jobs must be >= 1");
  if (kind == ExperimentKind::Completion) {
    if (pipeline.dataset != DatasetKind::ToyFaces) throw ConfigError("completion needs dataset.kind = toy-faces");
    if (completion.stages.empty()) throw ConfigError("completion.stages must not be empty");
    for (std::size_t s : completion.stages) {
      if (s == 0 || (!completion.checkpoint_dir && s > pipeline.nstages)) {
        throw ConfigError("completion.stages: stage " + std::to_string(s) + " is not produced by the pipeline");
      }
    }
    if (completion.n_images == 0) throw ConfigError("completion.n_images must be >= 1");
  }
  if (kind == ExperimentKind::MetricsOnly && !checkpoint_dir) {
    throw ConfigError("metrics-only needs checkpoint_dir");
  }
}

namespace {

// Reads keys of one JSON object and rejects any it was not asked about.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    convert(j_.at(key), out, child(key));
  }

  bool has(const char* key) const { return j_.contains(key); }

  Fields object(const char* key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Fields(j_.contains(key) ? j_.at(key) : empty, child(key));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) throw ConfigError("unknown key '" + child(k) + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : "'" + path_ + "'"; }
  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  static void convert(const json& v, double& out, const std::string& at) {
    if (!v.is_number()) throw ConfigError("'" + at + "' must be a number");
    out = v.get<double>();
  }
  static void convert(const json& v, bool& out, const std::string& at) {
    if (!v.is_boolean()) throw ConfigError("'" + at + "' must be true or false");
    out = v.get<bool>();
  }
  static void convert(const json& v, std::uint64_t& out, const std::string& at) {
    if (!v.is_number_unsigned()) throw ConfigError("'" + at + "' must be a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  static void convert(const json& v, std::string& out, const std::string& at) {
    if (!v.is_string()) throw ConfigError("'" + at + "' must be a string");
    out = v.get<std::string>();
  }
  static void convert(const json& v, std::vector<std::size_t>& out, const std::string& at) {
    if (!v.is_array()) throw ConfigError("'" + at + "' must be an array of integers");
    out.clear();
    for (const auto& e : v) {
      std::uint64_t u = 0;
      convert(e, u, at);
      out.push_back(static_cast<std::size_t>(u));
    }
  }
  template <typename T>
  static void convert(const json& v, std::optional<T>& out, const std::string& at) {
    if (v.is_null()) {
      out.reset();
      return;
    }
    T t{};
    convert(v, t, at);
    out = t;
  }
  static void convert(const json& v, std::filesystem::path& out, const std::string& at) {
    std::string s;
    convert(v, s, at);
    out = s;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename E, typename Parse>
void read_enum(Fields& f, const char* key, E& out, Parse parse) {
  std::optional<std::string> name;
  f.read(key, name);
  if (name) out = parse(*name);
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text, std::string_view source) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(source) + ": " + e.what());
  }
  ExperimentConfig cfg;
  PipelineConfig& p = cfg.pipeline;
  try {
    Fields top(root, "");
    read_enum(top, "experiment", cfg.kind, parse_experiment_kind);
    top.read("seed", cfg.seed);
    top.read("output_dir", cfg.output_dir);
    top.read("log_wall_time", p.record_wall_time);
    top.read("nstages", p.nstages);
    top.read("checkpoint_dir", cfg.checkpoint_dir);
    top.read("jobs", cfg.jobs);
    read_enum(top, "loss", p.loss, parse_loss_kind);
    read_enum(top, "encoder_mode", p.encoder_mode, parse_encoder_mode);

    p.seeds = SeedSet::from_master(cfg.seed);
    {
      Fields s = top.object("seeds");
      s.read("data", p.seeds.data);
      s.read("init", p.seeds.init);
      s.read("training", p.seeds.training);
      s.read("completion", p.seeds.completion);
      s.finish();
    }
    {
      Fields d = top.object("dataset");
      read_enum(d, "kind", p.dataset, parse_dataset_kind);
      d.read("n", p.n_samples);
      d.finish();
    }
    {
      Fields m = top.object("model");
      m.read("latent_dim", p.arch.latent_dim);
      m.read("gen_hidden", p.arch.gen_hidden);
      m.read("disc_hidden", p.arch.disc_hidden);
      m.read("enc_hidden", p.arch.enc_hidden);
      m.read("leaky_slope", p.arch.leaky_slope);
      m.finish();
    }
    {
      Fields w = top.object("loss_weights");
      w.read("lambda_gp", p.weights.lambda_gp);
      w.read("lambda_clamp", p.weights.lambda_clamp);
      w.read("epsilon_margin", p.weights.epsilon_margin);
      w.finish();
    }
    {
      Fields s = top.object("schedule");
      s.read("critic_steps_per_gen_step", p.schedule.critic_steps_per_gen_step);
      s.read("max_stage_epochs", p.schedule.max_stage_epochs);
      s.read("gap_stability_window", p.schedule.gap_stability_window);
      s.read("gap_stability_threshold", p.schedule.gap_stability_threshold);
      s.read("batch_size", p.schedule.batch_size);
      s.finish();
    }
    {
      Fields o = top.object("optimizer");
      o.read("lr_d", p.optim.lr_d);
      o.read("lr_g", p.optim.lr_g);
      o.read("lr_e", p.optim.lr_e);
      o.read("beta1", p.optim.beta1);
      o.read("beta2", p.optim.beta2);
      o.read("eps", p.optim.eps);
      o.finish();
    }
    {
      Fields s = top.object("stage1");
      s.read("vae_epochs", p.vae_epochs);
      s.read("vae_kl_weight", p.vae_kl_weight);
      s.read("warm_start_epochs", p.warm_start_epochs);
      s.read("adversarial", p.stage1_adversarial);
      s.read("epochs", p.stage1_epochs);
      s.finish();
    }
    {
      Fields m = top.object("metrics");
      m.read("eval_samples", p.eval_samples);
      m.read("n_proj", p.sw_projections);
      m.finish();
    }
    {
      Fields c = top.object("completion");
      CompletionRunConfig& r = cfg.completion;
      c.read("lambda", r.search.lambda);
      c.read("iterations", r.search.iterations);
      c.read("step_size", r.search.step_size);
      c.read("log_every", r.search.log_every);
      read_enum(c, "z_init", r.search.z_init, parse_z_init);
      read_enum(c, "mask", r.mask, parse_mask_kind);
      c.read("stages", r.stages);
      c.read("n_images", r.n_images);
      c.read("checkpoint_dir", r.checkpoint_dir);
      c.finish();
      // Without an encoder to start from, fall back to the prior.
      if (!c.has("z_init") && p.encoder_mode == EncoderMode::SampleAgnostic) r.search.z_init = ZInit::Prior;
    }
    {
      Fields f = top.object("fig2");
      f.read("n_samples", cfg.fig2.n_samples);
      f.read("steps", cfg.fig2.steps);
      f.read("batch_size", cfg.fig2.batch_size);
      f.read("lr", cfg.fig2.lr);
      f.read("hidden", cfg.fig2.hidden);
      f.read("x_min", cfg.fig2.x_min);
      f.read("x_max", cfg.fig2.x_max);
      f.read("x_step", cfg.fig2.x_step);
      f.finish();
    }
    top.finish();
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(source) + ": " + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string(source) + ": " + e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.string());
}

std::string resolved_config(const ExperimentConfig& cfg) {
  const PipelineConfig& p = cfg.pipeline;
  auto opt = [](const auto& o) { return o ? json(*o) : json(nullptr); };
  auto opt_path = [](const std::optional<std::filesystem::path>& o) {
    return o ? json(o->string()) : json(nullptr);
  };
  json j;
  j["experiment"] = to_string(cfg.kind);
  j["seed"] = cfg.seed;
  j["seeds"] = {{"data", p.seeds.data},
                {"init", p.seeds.init},
                {"training", p.seeds.training},
                {"completion", p.seeds.completion}};
  j["output_dir"] = cfg.output_dir.string();
  j["checkpoint_dir"] = opt_path(cfg.checkpoint_dir);
  j["jobs"] = cfg.jobs;
  j["log_wall_time"] = p.record_wall_time;
  j["nstages"] = p.nstages;
  j["loss"] = to_string(p.loss);
  j["encoder_mode"] = to_string(p.encoder_mode);
  j["dataset"] = {{"kind", to_string(p.dataset)}, {"n", p.n_samples}};
  j["model"] = {{"latent_dim", p.arch.latent_dim},
                {"gen_hidden", p.arch.gen_hidden},
                {"disc_hidden", p.arch.disc_hidden},
                {"enc_hidden", p.arch.enc_hidden},
                {"leaky_slope", p.arch.leaky_slope}};
  j["loss_weights"] = {{"lambda_gp", p.weights.lambda_gp},
                       {"lambda_clamp", p.weights.lambda_clamp},
                       {"epsilon_margin", p.weights.epsilon_margin}};
  j["schedule"] = {{"critic_steps_per_gen_step", p.schedule.critic_steps_per_gen_step},
                   {"max_stage_epochs", p.schedule.max_stage_epochs},
                   {"gap_stability_window", p.schedule.gap_stability_window},
                   {"gap_stability_threshold", opt(p.schedule.gap_stability_threshold)},
                   {"batch_size", p.schedule.batch_size}};
  j["optimizer"] = {{"lr_d", p.optim.lr_d}, {"lr_g", p.optim.lr_g}, {"lr_e", p.optim.lr_e},
                    {"beta1", p.optim.beta1}, {"beta2", p.optim.beta2}, {"eps", p.optim.eps}};
  j["stage1"] = {{"vae_epochs", p.vae_epochs},
                 {"vae_kl_weight", p.vae_kl_weight},
                 {"warm_start_epochs", p.warm_start_epochs},
                 {"adversarial", p.stage1_adversarial},
                 {"epochs", opt(p.stage1_epochs)}};
  j["metrics"] = {{"eval_samples", p.eval_samples}, {"n_proj", p.sw_projections}};
  const CompletionRunConfig& c = cfg.completion;
  j["completion"] = {{"lambda", c.search.lambda},
                     {"iterations", c.search.iterations},
                     {"step_size", c.search.step_size},
                     {"log_every", c.search.log_every},
                     {"z_init", to_string(c.search.z_init)},
                     {"mask", to_string(c.mask)},
                     {"stages", c.stages},
                     {"n_images", c.n_images},
                     {"checkpoint_dir", opt_path(c.checkpoint_dir)}};
  j["fig2"] = {{"n_samples", cfg.fig2.n_samples}, {"steps", cfg.fig2.steps},
               {"batch_size", cfg.fig2.batch_size}, {"lr", cfg.fig2.lr},
               {"hidden", cfg.fig2.hidden}, {"x_min", cfg.fig2.x_min},
               {"x_max", cfg.fig2.x_max}, {"x_step", cfg.fig2.x_step}};
  return j.dump(2) + "\n";
}

// ---- CSV ------------------------------------------------------------------

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct CsvWriter::Impl {
  std::filesystem::path path;
  std::filesystem::path partial;
  std::ofstream out;
  std::size_t columns = 0;
  bool finished = false;
};

CsvWriter::CsvWriter(std::filesystem::path path, std::vector<std::string> header) : impl_(std::make_unique<Impl>()) {
  impl_->path = std::move(path);
  impl_->partial = impl_->path;
  impl_->partial += ".partial";
  impl_->columns = header.size();
  impl_->out.open(impl_->partial, std::ios::binary | std::ios::trunc);
  if (!impl_->out) throw IoError("cannot write '" + impl_->partial.string() + "'");
  std::vector<Cell> cells(header.begin(), header.end());
  row(cells);
}

CsvWriter::CsvWriter(CsvWriter&&) noexcept = default;
CsvWriter& CsvWriter::operator=(CsvWriter&&) noexcept = default;
CsvWriter::~CsvWriter() = default;

void CsvWriter::row(const std::vector<Cell>& cells) {
  if (!impl_ || impl_->finished) throw IoError("csv: write after finish");
  if (cells.size() != impl_->columns) {
    throw IoError("csv " + impl_->path.string() + ": row has " + std::to_string(cells.size()) + " cells, expected " +
                  std::to_string(impl_->columns));
  }
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    std::visit(
        [&](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, std::string>) line += v;
          else if constexpr (std::is_same_v<T, double>) line += format_number(v);
          else line += std::to_string(v);
        },
        cells[i]);
  }
  line += '\n';
  impl_->out << line;
  impl_->out.flush();
  if (!impl_->out) throw IoError("write to '" + impl_->partial.string() + "' failed");
}

void CsvWriter::finish() {
  if (!impl_ || impl_->finished) return;
  impl_->out.close();
  std::error_code ec;
  std::filesystem::rename(impl_->partial, impl_->path, ec);
  if (ec) throw IoError("cannot finalize '" + impl_->path.string() + "': " + ec.message());
  impl_->finished = true;
}

// ---- fig2 -------------------------------------------------------------------

Fig2Result fig2_scores(const Fig2Config& cfg, const LossWeights& weights, const OptimizerSettings& optim,
                       std::uint64_t seed) {
  cfg.validate();
  const Tensor data = sample_real(DatasetKind::Gauss1dPair, cfg.n_samples, seed);
  const std::size_t half = cfg.n_samples / 2;

  MlpSpec spec;
  spec.widths.push_back(1);
  spec.widths.insert(spec.widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  spec.widths.push_back(1);

  enum Variant { Gan, Wgan, Lsgan, Margin };
  auto train = [&](Variant v, std::string_view name) {
    Rng init = make_rng(seed, std::string("fig2-init-") + std::string(name));
    Mlp critic = init_mlp(spec, init);
    Rng rng = make_rng(seed, std::string("fig2-train-") + std::string(name));
    std::uniform_int_distribution<std::size_t> pick_fake(0, half - 1), pick_real(half, cfg.n_samples - 1);
    Adam adam(optim.adam(cfg.lr));
    for (std::size_t step = 0; step < cfg.steps; ++step) {
      std::vector<std::size_t> fi(cfg.batch_size), ri(cfg.batch_size);
      for (auto& i : fi) i = pick_fake(rng);
      for (auto& i : ri) i = pick_real(rng);
      const Tensor x_fake = gather_rows(data, fi);
      const Tensor x_real = gather_rows(data, ri);
      BoundParams bp(critic.params, true);
      const Critic d = [&](const Var& in) { return mlp_forward(critic.spec, bp.vars(), in); };
      const Var d_real = d(Var(x_real));
      const Var d_fake = d(Var(x_fake));
      Var loss;
      switch (v) {
        case Gan: loss = baseline_loss(BaselineKind::Gan, d_real, d_fake, Role::Disc); break;
        case Lsgan: loss = baseline_loss(BaselineKind::Lsgan, d_real, d_fake, Role::Disc); break;
        case Wgan:
        case Margin: {
          const Tensor u = uniform({cfg.batch_size}, 0.0, 1.0, rng);
          const Var gp = gradient_penalty(d, x_real, x_fake, u);
          const Var base = v == Wgan ? baseline_loss(BaselineKind::Wgan, d_real, d_fake, Role::Disc)
                                     : margin_loss(d_fake, d_real, weights.epsilon_margin);
          loss = base + weights.lambda_gp * gp;
          break;
        }
      }
      if (!loss.value().all_finite()) {
        throw NumericError("fig2 " + std::string(name) + " critic loss became non-finite at step " +
                               std::to_string(step),
                           NumericContext{std::nullopt, std::nullopt, step, "fig2"});
      }
      adam.step(critic.params, bp.grads(loss));
    }
    return critic;
  };

  Fig2Result out;
  const std::size_t n = cfg.grid_size();
  for (std::size_t i = 0; i < n; ++i) out.x.push_back(cfg.x_min + static_cast<double>(i) * cfg.x_step);
  const Tensor grid({n, 1}, out.x);
  auto column = [&](const Mlp& m) {
    const Tensor s = mlp_forward(m, grid);
    return std::vector<double>(s.data().begin(), s.data().end());
  };
  out.d_gan_sigmoid = column(train(Gan, "gan"));
  for (double& s : out.d_gan_sigmoid) s = 1.0 / (1.0 + std::exp(-s));
  out.d_wgan = column(train(Wgan, "wgan"));
  out.d_lsgan = column(train(Lsgan, "lsgan"));
  out.d_margin = column(train(Margin, "margin"));
  return out;
}

// ---- pipeline artifacts -------------------------------------------------------

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::filesystem::path stage_file(const std::filesystem::path& dir, std::size_t stage, std::string_view suffix) {
  return dir / ("stage_" + std::to_string(stage) + "_" + std::string(suffix));
}

std::vector<CsvWriter::Cell> metric_row(std::size_t stage, const char* name, double value, std::size_t n_real,
                                        std::size_t n_fake, std::uint64_t seed) {
  return {std::uint64_t{stage}, std::string(name), value, std::uint64_t{n_real}, std::uint64_t{n_fake}, seed};
}

const std::vector<std::string> kMetricHeader{"stage", "metric", "value", "n_real", "n_fake", "seed"};

void write_metrics(CsvWriter& csv, const PipelineConfig& cfg, std::size_t stage, const StageMetrics& m) {
  const std::uint64_t seed = derive_seed(cfg.seeds.data, "sw");
  csv.row(metric_row(stage, "sliced_wasserstein", m.sliced_wasserstein, cfg.eval_samples, cfg.eval_samples, seed));
  if (m.mode_coverage) {
    csv.row(metric_row(stage, "mode_coverage", *m.mode_coverage, cfg.eval_samples, cfg.eval_samples, seed));
  }
}

class ArtifactWriter : public PipelineObserver {
 public:
  ArtifactWriter(std::filesystem::path dir, const PipelineConfig& cfg)
      : dir_(std::move(dir)),
        cfg_(cfg),
        vae_(dir_ / "vae_history.csv", {"epoch", "train_loss", "val_mse"}),
        margins_(dir_ / "margins.csv", {"stage", "m_high", "m_low"}),
        metrics_(dir_ / "metrics.csv", kMetricHeader),
        counters_(dir_ / "counters.csv",
                  {"stage", "epochs", "termination", "critic_steps", "gen_steps", "margin_computations",
                   "frozen_digest_start", "frozen_digest_end"}) {}

  void on_vae_epoch(const VaeEpoch& e) override {
    vae_.row({std::uint64_t{e.epoch}, e.train_loss, e.val_mse});
  }

  void on_stage_zero(const Dataset& data, const StageZeroResult& zero) override {
    vae_.finish();
    save_dataset(dir_ / "dataset.bin", data);
    save_model(dir_ / "encoder.ckpt", zero.encoder);
  }

  void on_stage_begin(const StageState& s) override {
    margins_.row({std::uint64_t{s.index}, s.margins.high, s.margins.low});
    history_ = std::make_unique<CsvWriter>(
        stage_file(dir_, s.index, "history.csv"),
        std::vector<std::string>{"stage", "epoch", "mean_d_real", "mean_d_fake_i", "mean_d_fake_prev", "loss_disc",
                                 "loss_gen", "gp", "clamp", "wall_ms"});
  }

  void on_epoch(const HistoryRow& r) override {
    history_->row({std::uint64_t{r.stage}, std::uint64_t{r.epoch}, r.mean_d_real, r.mean_d_fake_i,
                   r.mean_d_fake_prev, r.loss_disc, r.loss_gen, r.gp, r.clamp, r.wall_ms});
  }

  void on_stage_end(const StageState& s, const StageMetrics& m) override {
    history_->finish();
    history_.reset();
    save_model(stage_file(dir_, s.index, "G.ckpt"), s.gen);
    save_model(stage_file(dir_, s.index, "D.ckpt"), s.disc);
    counters_.row({std::uint64_t{s.index}, std::uint64_t{s.epoch}, s.termination_reason,
                   std::uint64_t{s.counters.critic_steps}, std::uint64_t{s.counters.gen_steps},
                   std::uint64_t{s.counters.margin_computations}, s.frozen_digest_start, s.frozen_digest_end});
    write_metrics(metrics_, cfg_, s.index, m);
  }

  void finish() {
    margins_.finish();
    metrics_.finish();
    counters_.finish();
  }

 private:
  std::filesystem::path dir_;
  const PipelineConfig& cfg_;
  CsvWriter vae_, margins_, metrics_, counters_;
  std::unique_ptr<CsvWriter> history_;
};

PipelineResult run_pipeline_with_artifacts(const ExperimentConfig& cfg) {
  ArtifactWriter writer(cfg.output_dir, cfg.pipeline);
  PipelineResult r = run_pipeline(cfg.pipeline, &writer);
  writer.finish();
  return r;
}

void run_fig2(const ExperimentConfig& cfg) {
  const Fig2Result r = fig2_scores(cfg.fig2, cfg.pipeline.weights, cfg.pipeline.optim, cfg.pipeline.seeds.training);
  CsvWriter csv(cfg.output_dir / "fig2_scores.csv", {"x", "d_gan_sigmoid", "d_wgan", "d_lsgan", "d_margin"});
  for (std::size_t i = 0; i < r.x.size(); ++i) {
    csv.row({r.x[i], r.d_gan_sigmoid[i], r.d_wgan[i], r.d_lsgan[i], r.d_margin[i]});
  }
  csv.finish();
}

void run_completion(const ExperimentConfig& cfg) {
  const CompletionRunConfig& c = cfg.completion;
  LoadedRun run;
  if (c.checkpoint_dir) {
    run = load_run(*c.checkpoint_dir);
  } else {
    PipelineResult p = run_pipeline_with_artifacts(cfg);
    run.data = std::move(p.data);
    run.encoder = std::move(p.stage_zero.encoder);
    for (auto& s : p.stages) {
      run.gens.push_back(std::move(s.state.gen));
      run.discs.push_back(std::move(s.state.disc));
    }
  }
  if (run.data.kind != DatasetKind::ToyFaces) throw ConfigError("completion needs a toy-faces run");

  Tensor test = run.data.test();
  const std::size_t n = std::min(c.n_images, test.dim(0));
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  test = gather_rows(test, rows);
  const Mask mask = make_mask(c.mask);

  CsvWriter report(cfg.output_dir / "completion_report.csv",
                   {"image_id", "mask_kind", "stage", "psnr", "ssim", "final_contextual", "final_perceptual",
                    "iterations"});
  CsvWriter traj(cfg.output_dir / "completion_trajectory.csv",
                 {"image_id", "stage", "iteration", "total", "contextual", "perceptual"});
  run.encoder.params.freeze();
  for (std::size_t stage : c.stages) {
    if (stage > run.gens.size()) {
      throw ConfigError("completion.stages: run has no stage " + std::to_string(stage));
    }
    CompletionModels models{run.gens[stage - 1], run.discs[stage - 1], &run.encoder, stage};
    models.gen.params.freeze();
    models.disc.params.freeze();
    const auto results = complete_images(models, test, mask, c.search, cfg.pipeline.seeds.completion, cfg.jobs);
    double mean_psnr = 0.0;
    for (const auto& r : results) {
      const CompletionRecord& rec = r.record;
      report.row({std::uint64_t{rec.image_id}, std::string(to_string(rec.mask_kind)), std::uint64_t{rec.stage},
                  rec.psnr, rec.ssim, rec.final_contextual, rec.final_perceptual, std::uint64_t{rec.iterations}});
      for (const auto& t : r.trajectory) {
        traj.row({std::uint64_t{rec.image_id}, std::uint64_t{stage}, std::uint64_t{t.iteration}, t.total,
                  t.contextual, t.perceptual});
      }
      mean_psnr += rec.psnr;
    }
    spdlog::info("completion stage {}: mean PSNR {:.3f} dB over {} images", stage,
                 mean_psnr / static_cast<double>(results.size()), results.size());
  }
  report.finish();
  traj.finish();
}

void run_metrics_only(const ExperimentConfig& cfg) {
  LoadedRun run = load_run(*cfg.checkpoint_dir);
  PipelineConfig p = cfg.pipeline;
  p.dataset = run.data.kind;
  CsvWriter csv(cfg.output_dir / "metrics.csv", kMetricHeader);
  const Mlp* encoder = p.encoder_mode == EncoderMode::SampleAware ? &run.encoder : nullptr;
  for (std::size_t i = 0; i < run.gens.size(); ++i) {
    write_metrics(csv, p, i + 1, evaluate_stage(p, run.gens[i], encoder));
  }
  csv.finish();
}

}  // namespace

LoadedRun load_run(const std::filesystem::path& dir) {
  LoadedRun run;
  run.data = load_dataset(dir / "dataset.bin");
  run.encoder = load_model(dir / "encoder.ckpt");
  for (std::size_t i = 1;; ++i) {
    const auto g = stage_file(dir, i, "G.ckpt");
    if (!std::filesystem::exists(g)) break;
    run.gens.push_back(load_model(g));
    run.discs.push_back(load_model(stage_file(dir, i, "D.ckpt")));
  }
  if (run.gens.empty()) throw IoError("no stage checkpoints in '" + dir.string() + "'");
  return run;
}

void run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.output_dir.string() + "': " + ec.message());
  write_text(cfg.output_dir / "config.resolved", resolved_config(cfg));
  spdlog::info("{} run -> {}", to_string(cfg.kind), cfg.output_dir.string());
  switch (cfg.kind) {
    case ExperimentKind::Pipeline: run_pipeline_with_artifacts(cfg); break;
    case ExperimentKind::Fig2Scores: run_fig2(cfg); break;
    case ExperimentKind::Completion: run_completion(cfg); break;
    case ExperimentKind::MetricsOnly: run_metrics_only(cfg); break;
  }
}

}  // namespace rankgan
