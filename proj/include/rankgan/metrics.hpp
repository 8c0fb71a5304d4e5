#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rankgan/nn.hpp"
#include "rankgan/tensor.hpp"

namespace rankgan {

struct MetricReport {
  std::string name;
  double value = 0.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  std::uint64_t seed = 0;
};

// Exact Wasserstein-1 between two empirical 1D distributions. Equal sizes
// reduce to mean |sort(a)_i - sort(b)_i|; unequal sizes integrate
// |F_a - F_b| over the merged support.
double wasserstein1_1d(std::span<const double> a, std::span<const double> b);

// Mean of wasserstein1_1d over n_proj random unit directions; a and b are
// [n x d] with equal d.
double sliced_wasserstein(const Tensor& a, const Tensor& b, std::size_t n_proj, std::uint64_t seed);

inline constexpr double kPsnrCap = 99.0;

// 10 log10(max_val^2 / MSE), capped at 99 dB (identical images).
double psnr(const Tensor& ref, const Tensor& test, double max_val = 2.0);

struct SsimConstants {
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 2.0;
};

// Single-window SSIM over the whole image (population statistics).
double ssim(const Tensor& ref, const Tensor& test, SsimConstants c = {});

struct ScoreStats {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

ScoreStats score_stats(std::span<const double> scores);
// Statistics of critic(samples) over every row.
ScoreStats score_stats(const Mlp& critic, const Tensor& samples);

// Fraction of `centres` with at least one sample within `radius`.
double mode_coverage(const Tensor& samples, std::span<const std::pair<double, double>> centres,
                     double radius);

}  // namespace rankgan
