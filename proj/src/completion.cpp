#include "rankgan/completion.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <string>
#include <thread>

#include "rankgan/errors.hpp"
#include "rankgan/metrics.hpp"
#include "rankgan/optim.hpp"
#include "rankgan/rng.hpp"

namespace rankgan {

ZInit parse_z_init(std::string_view name) {
  if (name == "encoder") return ZInit::Encoder;
  if (name == "prior") return ZInit::Prior;
  throw ConfigError("unknown z_init '" + std::string(name) + "'");
}

std::string_view to_string(ZInit init) { return init == ZInit::Encoder ? "encoder" : "prior"; }

void CompletionConfig::validate() const {
  if (iterations == 0) throw ConfigError("completion: iterations must be >= 1");
  if (!(lambda >= 0.0)) throw ConfigError("completion: lambda must be >= 0");
  if (!(step_size > 0.0)) throw ConfigError("completion: step_size must be positive");
  if (log_every == 0) throw ConfigError("completion: log_every must be >= 1");
}

Var contextual_loss(const Var& gen_out, const Tensor& y, const Mask& mask) {
  const std::size_t px = mask.visible.numel();
  if (gen_out.shape().empty() || gen_out.shape().back() != px || y.shape().back() != px) {
    throw ShapeError("contextual_loss: output " + shape_str(gen_out.shape()) + ", target " + shape_str(y.shape()) +
                     " and a mask of " + std::to_string(px) + " pixels do not match");
  }
  const std::size_t rows = gen_out.numel() / px;
  const Var diff = (gen_out - Var(y)) * Var(mask.visible);
  return sum(abs(diff)) * (1.0 / static_cast<double>(rows));
}

Var perceptual_loss(const Mlp& disc, const Var& gen_out) {
  const BoundParams dp(disc.params, false);
  return -mean(mlp_forward(disc.spec, dp.vars(), gen_out));
}

LatentSearchResult optimize_latent(const Mlp& gen, const Mlp& disc, const Tensor& y, const Mask& mask,
                                   const CompletionConfig& config, const Tensor& z_init) {
  config.validate();
  if (!gen.params.frozen() || !disc.params.frozen()) {
    throw std::logic_error("optimize_latent: generator and critic must be frozen");
  }
  if (z_init.rank() != 2 || z_init.dim(0) != 1 || z_init.dim(1) != gen.spec.input_width()) {
    throw ShapeError("optimize_latent: z_init must be [1 x " + std::to_string(gen.spec.input_width()) + "], got " +
                     shape_str(z_init.shape()));
  }
  const BoundParams gp(gen.params, false);

  struct Eval {
    Var total;
    double contextual, perceptual;
  };
  auto evaluate = [&](const Var& z, std::size_t iteration) {
    const Var out = mlp_forward(gen.spec, gp.vars(), z);
    const Var c = contextual_loss(out, y, mask);
    const Var p = perceptual_loss(disc, out);
    Eval e{c + config.lambda * p, c.item(), p.item()};
    if (!e.total.value().all_finite()) {
      throw NumericError("completion loss became non-finite at iteration " + std::to_string(iteration),
                         NumericContext{std::nullopt, std::nullopt, iteration, "completion"});
    }
    return e;
  };

  LatentSearchResult res;
  res.z = z_init;
  TensorAdam adam(AdamConfig{config.step_size, 0.9, 0.999, 1e-8});
  const double T = static_cast<double>(config.iterations);
  for (std::size_t t = 0; t < config.iterations; ++t) {
    const Var z(res.z, true);
    const Eval e = evaluate(z, t);
    if (t == 0 || t % config.log_every == 0) res.trajectory.push_back({t, e.total.item(), e.contextual, e.perceptual});
    const Var g = grad(e.total, std::span<const Var>(&z, 1)).front();
    const double scale = 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) / T));
    adam.step(res.z, g.value(), scale);
    ++res.steps;
  }
  NoGradGuard no_grad;
  const Eval last = evaluate(Var(res.z), config.iterations);
  res.trajectory.push_back({config.iterations, last.total.item(), last.contextual, last.perceptual});
  return res;
}

Tensor initial_latent(ZInit init, const Mlp* encoder, const Tensor& y_corrupted, std::size_t latent_dim, Rng& rng) {
  if (init == ZInit::Prior) return standard_normal({1, latent_dim}, rng);
  if (encoder == nullptr) throw ConfigError("z_init = encoder needs a trained encoder");
  const Tensor row = y_corrupted.reshaped({1, y_corrupted.numel()});
  return encoder_forward(*encoder, row).mu.value();
}

Tensor blend(const Tensor& y, const Mask& mask, const Tensor& g) {
  if (y.numel() != mask.visible.numel() || g.numel() != y.numel()) {
    throw ShapeError("blend: image " + shape_str(y.shape()) + ", generated " + shape_str(g.shape()) +
                     " and a mask of " + std::to_string(mask.visible.numel()) + " pixels do not match");
  }
  Tensor out = y;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    if (mask.visible[i] == 0.0) out[i] = g[i];
  }
  return out;
}

namespace {

CompletionJobResult complete_one(const CompletionModels& m, const Tensor& image, std::size_t id, const Mask& mask,
                                 const CompletionConfig& cfg, std::uint64_t seed) {
  Rng rng = make_rng(seed, "image-" + std::to_string(id));
  const Tensor y = apply_mask(image, mask, 0.0);
  const Tensor z0 = initial_latent(cfg.z_init, m.encoder, y, m.gen.spec.input_width(), rng);
  const LatentSearchResult r = optimize_latent(m.gen, m.disc, y, mask, cfg, z0);
  const Tensor g = mlp_forward(m.gen, r.z);

  CompletionJobResult out;
  out.completed = blend(y, mask, g);
  out.trajectory = r.trajectory;
  CompletionRecord& rec = out.record;
  rec.image_id = id;
  rec.mask_kind = mask.kind;
  rec.stage = m.stage;
  rec.psnr = psnr(image, out.completed);
  rec.ssim = ssim(image, out.completed);
  rec.final_contextual = r.final().contextual;
  rec.final_perceptual = r.final().perceptual;
  rec.iterations = r.steps;
  rec.psnr_corrupted = psnr(image, y);
  return out;
}

}  // namespace

std::vector<CompletionJobResult> complete_images(const CompletionModels& models, const Tensor& images,
                                                 const Mask& mask, const CompletionConfig& config,
                                                 std::uint64_t seed, std::size_t jobs) {
  config.validate();
  if (images.rank() != 2 || images.dim(1) != mask.visible.numel()) {
    throw ShapeError("complete_images: expected [n x " + std::to_string(mask.visible.numel()) + "] images, got " +
                     shape_str(images.shape()));
  }
  const std::size_t n = images.dim(0);
  const std::size_t px = images.dim(1);
  std::vector<CompletionJobResult> results(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const std::vector<double> row(images.data().begin() + static_cast<std::ptrdiff_t>(i * px),
                                      images.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * px));
        results[i] = complete_one(models, Tensor({px}, row), i, mask, config, seed);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace rankgan
