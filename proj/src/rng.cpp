#include "rankgan/rng.hpp"

namespace rankgan {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Tensor standard_normal(Shape shape, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

Tensor uniform(Shape shape, double lo, double hi, Rng& rng) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace rankgan
