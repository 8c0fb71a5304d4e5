#pragma once

// JSON-configured experiments and their on-disk artifacts.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rankgan/completion.hpp"
#include "rankgan/stagewise.hpp"

namespace rankgan {

enum class ExperimentKind { Pipeline, Fig2Scores, Completion, MetricsOnly };

ExperimentKind parse_experiment_kind(std::string_view name);
std::string_view to_string(ExperimentKind kind);

struct Fig2Config {
  std::size_t n_samples = 2000;
  std::size_t steps = 3000;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  std::vector<std::size_t> hidden{32, 32};
  double x_min = -5.0;
  double x_max = 5.0;
  double x_step = 0.05;

  std::size_t grid_size() const;
  void validate() const;
};

struct CompletionRunConfig {
  CompletionConfig search;
  MaskKind mask = MaskKind::CenterLarge;
  std::vector<std::size_t> stages{1, 2, 3};
  std::size_t n_images = 50;
  // Existing pipeline output to complete with; unset trains one first.
  std::optional<std::filesystem::path> checkpoint_dir;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Pipeline;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/default";
  PipelineConfig pipeline;
  CompletionRunConfig completion;
  Fig2Config fig2;
  std::optional<std::filesystem::path> checkpoint_dir;  // metrics-only input
  std::size_t jobs = 1;  // worker threads for completion

  void validate() const;
};

// Throws ConfigError on malformed JSON, unknown keys, wrong types or values
// that fail validation. Sub-seeds default to SeedSet::from_master(seed).
ExperimentConfig parse_config(std::string_view json_text, std::string_view source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

// Every field with its effective value, as indented JSON.
std::string resolved_config(const ExperimentConfig& cfg);

// Rows are buffered in `<path>.partial` until finish() renames the file.
class CsvWriter {
 public:
  CsvWriter(std::filesystem::path path, std::vector<std::string> header);
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;
  CsvWriter(CsvWriter&&) noexcept;
  CsvWriter& operator=(CsvWriter&&) noexcept;
  ~CsvWriter();

  // Doubles use the shortest round-trip representation.
  using Cell = std::variant<std::string, double, std::uint64_t>;
  void row(const std::vector<Cell>& cells);
  void finish();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string format_number(double v);

struct Fig2Result {
  std::vector<double> x;
  std::vector<double> d_gan_sigmoid;
  std::vector<double> d_wgan;
  std::vector<double> d_lsgan;
  std::vector<double> d_margin;
};

// Trains gan, wgan + GP, lsgan and margin + GP critics to separate
// N(-2, 0.5^2) (fake) from N(+2, 0.5^2) (real) and tabulates them on the grid.
Fig2Result fig2_scores(const Fig2Config& cfg, const LossWeights& weights, const OptimizerSettings& optim,
                       std::uint64_t seed);

// Output directory contents per kind:
//   pipeline:    config.resolved, dataset.bin, encoder.ckpt, vae_history.csv,
//                stage_<i>_{G,D}.ckpt, stage_<i>_history.csv, margins.csv,
//                metrics.csv, counters.csv
//   fig2-scores: config.resolved, fig2_scores.csv
//   completion:  pipeline artifacts (unless checkpoint_dir is set),
//                completion_report.csv, completion_trajectory.csv
//   metrics-only: config.resolved, metrics.csv
void run_experiment(const ExperimentConfig& cfg);

// Loads the models of a finished pipeline run.
struct LoadedRun {
  Dataset data;
  Mlp encoder;
  std::vector<Mlp> gens;   // index 0 = stage 1
  std::vector<Mlp> discs;
};
LoadedRun load_run(const std::filesystem::path& dir);

}  // namespace rankgan
