#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "rankgan/tensor.hpp"

namespace rankgan {

using Rng = std::mt19937_64;

// Deterministic child seed for a named stream: mixing is a splitmix64 finalizer
// over seed ^ fnv1a(name), so sibling streams never share state.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

inline Rng make_rng(std::uint64_t seed, std::string_view name) { return Rng(derive_seed(seed, name)); }

Tensor standard_normal(Shape shape, Rng& rng);
Tensor uniform(Shape shape, double lo, double hi, Rng& rng);

}  // namespace rankgan
