#pragma once

// Image completion by latent search: find z minimising
//   ||M * G(z) - M * y||_1 + lambda * (-D(G(z)))
// with Adam on z alone, then blend M * y + (1 - M) * G(z).

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "rankgan/data.hpp"
#include "rankgan/nn.hpp"

namespace rankgan {

enum class ZInit { Encoder, Prior };

ZInit parse_z_init(std::string_view name);
std::string_view to_string(ZInit init);

struct CompletionConfig {
  double lambda = 10.0;
  std::size_t iterations = 2000;
  double step_size = 0.05;  // Adam learning rate, cosine-decayed to 0 over the budget
  ZInit z_init = ZInit::Encoder;
  std::size_t log_every = 100;

  void validate() const;
};

// Sum of |G(z) - y| over visible pixels, averaged over the batch rows.
// gen_out is [batch x pixels]; y is [pixels] or [batch x pixels].
Var contextual_loss(const Var& gen_out, const Tensor& y, const Mask& mask);

// Batch mean of -D(gen_out). D's parameters are constants.
Var perceptual_loss(const Mlp& disc, const Var& gen_out);

struct TrajectoryPoint {
  std::size_t iteration = 0;  // Adam steps taken
  double total = 0.0;
  double contextual = 0.0;
  double perceptual = 0.0;
};

struct LatentSearchResult {
  Tensor z;
  std::size_t steps = 0;
  // Iteration 0, every log_every steps, and the final iterate.
  std::vector<TrajectoryPoint> trajectory;

  const TrajectoryPoint& initial() const { return trajectory.front(); }
  const TrajectoryPoint& final() const { return trajectory.back(); }
};

// G and D must be frozen; z_init is [1 x latent]. Throws NumericError naming
// the iteration if the loss stops being finite.
LatentSearchResult optimize_latent(const Mlp& gen, const Mlp& disc, const Tensor& y, const Mask& mask,
                                   const CompletionConfig& config, const Tensor& z_init);

// Encoder mean of the corrupted image, or a standard-normal draw.
Tensor initial_latent(ZInit init, const Mlp* encoder, const Tensor& y_corrupted, std::size_t latent_dim, Rng& rng);

// M * y + (1 - M) * g, with visible pixels copied bit-exactly from y.
Tensor blend(const Tensor& y, const Mask& mask, const Tensor& g);

struct CompletionRecord {
  std::size_t image_id = 0;
  MaskKind mask_kind = MaskKind::CenterLarge;
  std::size_t stage = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double final_contextual = 0.0;
  double final_perceptual = 0.0;
  std::size_t iterations = 0;
  double psnr_corrupted = 0.0;  // fill-initialised input against the original
};

struct CompletionJobResult {
  CompletionRecord record;
  Tensor completed;
  std::vector<TrajectoryPoint> trajectory;
};

struct CompletionModels {
  Mlp gen;
  Mlp disc;
  const Mlp* encoder = nullptr;  // required for ZInit::Encoder
  std::size_t stage = 0;
};

// Completes every row of `images` independently. Each image draws from its own
// stream of `seed`, so results do not depend on `jobs`.
std::vector<CompletionJobResult> complete_images(const CompletionModels& models, const Tensor& images,
                                                 const Mask& mask, const CompletionConfig& config,
                                                 std::uint64_t seed, std::size_t jobs = 1);

}  // namespace rankgan
