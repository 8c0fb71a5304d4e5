#include "rankgan/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "rankgan/errors.hpp"
#include "rankgan/rng.hpp"

namespace rankgan {

double wasserstein1_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ShapeError("wasserstein1_1d: empty sample set");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  if (sa.size() == sb.size()) {
    double total = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) total += std::fabs(sa[i] - sb[i]);
    return total / static_cast<double>(sa.size());
  }
  // Sweep the merged support accumulating |F_a - F_b| * dx.
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double x = std::min(sa[0], sb[0]);
  double total = 0.0;
  while (i < sa.size() || j < sb.size()) {
    const double next = j == sb.size() || (i < sa.size() && sa[i] <= sb[j]) ? sa[i] : sb[j];
    total += std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - x);
    x = next;
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
  }
  return total;
}

double sliced_wasserstein(const Tensor& a, const Tensor& b, std::size_t n_proj, std::uint64_t seed) {
  if (n_proj == 0) throw ShapeError("sliced_wasserstein: n_proj must be >= 1");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw ShapeError("sliced_wasserstein: incompatible sample shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t d = a.dim(1);
  Rng rng = make_rng(seed, "sliced_wasserstein");
  std::vector<double> pa(a.dim(0)), pb(b.dim(0));
  double total = 0.0;
  for (std::size_t p = 0; p < n_proj; ++p) {
    Tensor dir = standard_normal({d}, rng);
    double norm = 0.0;
    for (double v : dir.data()) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : dir.data()) v /= norm;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += a[i * d + k] * dir[k];
      pa[i] = s;
    }
    for (std::size_t i = 0; i < pb.size(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += b[i * d + k] * dir[k];
      pb[i] = s;
    }
    total += wasserstein1_1d(pa, pb);
  }
  return total / static_cast<double>(n_proj);
}

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " differ");
  }
}

}  // namespace

double psnr(const Tensor& ref, const Tensor& test, double max_val) {
  require_same(ref, test, "psnr");
  double mse = 0.0;
  for (std::size_t i = 0; i < ref.numel(); ++i) mse += (ref[i] - test[i]) * (ref[i] - test[i]);
  mse /= static_cast<double>(ref.numel());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(max_val * max_val / mse));
}

double ssim(const Tensor& ref, const Tensor& test, SsimConstants c) {
  require_same(ref, test, "ssim");
  const double n = static_cast<double>(ref.numel());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < ref.numel(); ++i) {
    mx += ref[i];
    my += test[i];
  }
  mx /= n;
  my /= n;
  double vx = 0.0, vy = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < ref.numel(); ++i) {
    vx += (ref[i] - mx) * (ref[i] - mx);
    vy += (test[i] - my) * (test[i] - my);
    cov += (ref[i] - mx) * (test[i] - my);
  }
  vx /= n;
  vy /= n;
  cov /= n;
  const double c1 = (c.k1 * c.dynamic_range) * (c.k1 * c.dynamic_range);
  const double c2 = (c.k2 * c.dynamic_range) * (c.k2 * c.dynamic_range);
  return ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
}

ScoreStats score_stats(std::span<const double> scores) {
  if (scores.empty()) throw ShapeError("score_stats: no scores");
  double m = 0.0;
  for (double s : scores) m += s;
  m /= static_cast<double>(scores.size());
  double v = 0.0;
  for (double s : scores) v += (s - m) * (s - m);
  v /= static_cast<double>(scores.size());
  return {m, std::sqrt(v)};
}

ScoreStats score_stats(const Mlp& critic, const Tensor& samples) {
  const Tensor scores = mlp_forward(critic, samples);
  return score_stats(scores.data());
}

double mode_coverage(const Tensor& samples, std::span<const std::pair<double, double>> centres,
                     double radius) {
  if (samples.rank() != 2 || samples.dim(1) != 2) {
    throw ShapeError("mode_coverage: expected [n x 2] samples, got " + shape_str(samples.shape()));
  }
  std::size_t covered = 0;
  for (const auto& [cx, cy] : centres) {
    for (std::size_t i = 0; i < samples.dim(0); ++i) {
      const double dx = samples[2 * i] - cx, dy = samples[2 * i + 1] - cy;
      if (dx * dx + dy * dy <= radius * radius) {
        ++covered;
        break;
      }
    }
  }
  return static_cast<double>(covered) / static_cast<double>(centres.size());
}

}  // namespace rankgan
