// rankgan: experiment runner.
//
//   rankgan run <config.json>... [--seed S] [--out DIR] [--jobs N]
//   rankgan fig2 <config.json> [--seed S] [--out DIR]
//   rankgan complete <config.json> --stage I --mask KIND [--seed S] [--out DIR] [--jobs N]
//   rankgan verify-checkpoint <path>
//
// Exit codes: 0 ok, 2 bad config or usage, 3 numeric failure, 4 I/O failure.

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "rankgan/checkpoint.hpp"
#include "rankgan/errors.hpp"
#include "rankgan/experiment.hpp"

namespace {

using namespace rankgan;

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

void configure_logging() {
  const char* env = std::getenv("RANKGAN_LOG");
  const std::string level = env ? env : "info";
  if (level == "quiet") spdlog::set_level(spdlog::level::err);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else spdlog::set_level(spdlog::level::info);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
}

struct Failure {
  int code = 0;
  nlohmann::json record;
};

// Runs `f`, mapping library exceptions to an exit code and error record.
template <typename F>
std::optional<Failure> guarded(F&& f) {
  auto fail = [](int code, std::string_view kind, const std::string& message) {
    Failure out{code, {{"error", kind}, {"message", message}, {"exit_code", code}}};
    return std::optional<Failure>(std::move(out));
  };
  try {
    f();
    return std::nullopt;
  } catch (const ConfigError& e) {
    return fail(kExitConfig, "config", e.what());
  } catch (const NumericError& e) {
    auto out = fail(kExitNumeric, "numeric", e.what());
    const NumericContext& c = e.context();
    auto opt = [](const std::optional<std::size_t>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    out->record["stage"] = opt(c.stage);
    out->record["epoch"] = opt(c.epoch);
    out->record["step"] = opt(c.step);
    out->record["component"] = c.component;
    return out;
  } catch (const IoError& e) {
    return fail(kExitIo, "io", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(kExitIo, "io", e.what());
  }
}

void report(const Failure& f, const std::optional<std::filesystem::path>& dir) {
  const std::string text = f.record.dump();
  std::cerr << text << "\n";
  if (dir && std::filesystem::is_directory(*dir)) {
    std::ofstream(*dir / "error.json") << text << "\n";
  }
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::size_t jobs = 1;
};

ExperimentConfig load_with_overrides(const std::string& path, const Overrides& o) {
  ExperimentConfig cfg = load_config(path);
  if (o.seed) {
    // Re-parse so sub-seeds not pinned in the file follow the new master seed.
    std::ifstream in(path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    j["seed"] = *o.seed;
    cfg = parse_config(j.dump(), path);
  }
  if (o.out) cfg.output_dir = *o.out;
  cfg.jobs = o.jobs;
  return cfg;
}

// Parses every config before touching the file system.
int run_configs(const std::vector<std::string>& paths, const Overrides& o,
                const std::function<void(ExperimentConfig&)>& adjust = {}) {
  std::vector<ExperimentConfig> configs;
  for (const auto& p : paths) {
    std::optional<Failure> f = guarded([&] {
      ExperimentConfig cfg = load_with_overrides(p, o);
      if (adjust) adjust(cfg);
      cfg.validate();
      configs.push_back(std::move(cfg));
    });
    if (f) {
      report(*f, std::nullopt);
      return f->code;
    }
  }
  if (configs.size() > 1 && o.out) {
    report({kExitConfig, {{"error", "config"}, {"message", "--out needs a single config"}, {"exit_code", kExitConfig}}},
           std::nullopt);
    return kExitConfig;
  }

  std::vector<int> codes(configs.size(), 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      ExperimentConfig& cfg = configs[i];
      // Concurrent configs each take one thread.
      if (configs.size() > 1) cfg.jobs = 1;
      if (std::optional<Failure> f = guarded([&] { run_experiment(cfg); })) {
        report(*f, cfg.output_dir);
        codes[i] = f->code;
      }
    }
  };
  const std::size_t threads = configs.size() > 1 ? std::min(o.jobs, configs.size()) : 1;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  for (int c : codes) {
    if (c != 0) return c;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Stage-wise ranking GAN experiments"};
  app.require_subcommand(1);

  Overrides o;
  std::uint64_t seed = 0;
  std::string out;
  auto add_common = [&](CLI::App* sub, bool jobs) {
    sub->add_option("--seed", seed, "master seed override");
    sub->add_option("--out", out, "output directory override");
    if (jobs) sub->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
  };

  std::vector<std::string> run_paths;
  auto* run = app.add_subcommand("run", "run one or more experiment configs");
  run->add_option("config", run_paths, "config files")->required();
  add_common(run, true);

  std::string fig2_path;
  auto* fig2 = app.add_subcommand("fig2", "tabulate critic score curves on gauss1d-pair");
  fig2->add_option("config", fig2_path, "config file")->required();
  add_common(fig2, false);

  std::string complete_path, mask;
  std::size_t stage = 0;
  auto* complete = app.add_subcommand("complete", "complete masked toy faces with one stage's models");
  complete->add_option("config", complete_path, "config file")->required();
  complete->add_option("--stage", stage, "stage index")->required()->check(CLI::PositiveNumber);
  complete->add_option("--mask", mask, "mask kind")
      ->required()
      ->check(CLI::IsMember({"center-small", "center-large", "periocular-small", "periocular-large"}));
  add_common(complete, true);

  std::string ckpt_path;
  auto* verify = app.add_subcommand("verify-checkpoint", "check that a checkpoint re-encodes byte-identically");
  verify->add_option("path", ckpt_path, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  for (auto* sub : {run, fig2, complete}) {
    if (sub->parsed()) {
      if (sub->count("--seed")) o.seed = seed;
      if (sub->count("--out")) o.out = out;
    }
  }

  if (run->parsed()) return run_configs(run_paths, o);
  if (fig2->parsed()) {
    return run_configs({fig2_path}, o, [](ExperimentConfig& cfg) { cfg.kind = ExperimentKind::Fig2Scores; });
  }
  if (complete->parsed()) {
    return run_configs({complete_path}, o, [&](ExperimentConfig& cfg) {
      cfg.kind = ExperimentKind::Completion;
      cfg.completion.stages = {stage};
      cfg.completion.mask = parse_mask_kind(mask);
    });
  }
  if (verify->parsed()) {
    if (auto f = guarded([&] { verify_checkpoint(ckpt_path); })) {
      report(*f, std::nullopt);
      return f->code;
    }
    std::cout << ckpt_path << ": ok\n";
    return 0;
  }
  return kExitConfig;
}
