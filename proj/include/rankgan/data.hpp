#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "rankgan/tensor.hpp"

namespace rankgan {

enum class DatasetKind { Gauss1dPair, Gauss2d, Ring8, ToyFaces };

DatasetKind parse_dataset_kind(std::string_view name);
std::string_view to_string(DatasetKind kind);
std::size_t data_dim(DatasetKind kind);

// Toy-face geometry.
inline constexpr std::size_t kFaceSide = 8;
inline constexpr double kRingStd = 0.05;
inline constexpr double kGauss1dMean = 2.0;
inline constexpr double kGauss1dStd = 0.5;

// Centres of the eight ring modes, (cos 2 pi k/8, sin 2 pi k/8).
std::vector<std::pair<double, double>> ring8_centres();

// n samples of `kind` as an [n x dim] tensor, deterministic in `seed`.
//   gauss1d-pair: first half N(-2, 0.5^2) (label 0), second half N(+2, 0.5^2) (label 1)
//   gauss2d:      equal mixture of N((-1,0), 0.1^2 I) and N((1,0), 0.1^2 I)
//   ring8:        equal mixture of N(c_k, 0.05^2 I) on the unit circle
//   toy-faces:    8x8 procedural faces flattened to 64 values in [-1, 1]
Tensor sample_real(DatasetKind kind, std::size_t n, std::uint64_t seed);

// n draws from N(mean, std^2) as [n x 1].
Tensor sample_gauss1d(double mean, double std, std::size_t n, std::uint64_t seed);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// 90/10 train/test split of a seeded permutation, then 10% of train carved
// off as validation. N = 100 gives 81 / 9 / 10.
SplitIndices split(std::size_t n, std::uint64_t seed);

struct Dataset {
  DatasetKind kind = DatasetKind::Ring8;
  Tensor samples;
  std::vector<int> labels;  // only for gauss1d-pair
  SplitIndices indices;

  Tensor train() const { return gather_rows(samples, indices.train); }
  Tensor val() const { return gather_rows(samples, indices.val); }
  Tensor test() const { return gather_rows(samples, indices.test); }
};

Dataset make_dataset(DatasetKind kind, std::size_t n, std::uint64_t seed);

// Dataset export uses the record file format with kind "dataset".
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

enum class MaskKind { CenterSmall, CenterLarge, PeriocularSmall, PeriocularLarge };

MaskKind parse_mask_kind(std::string_view name);
std::string_view to_string(MaskKind kind);

// Binary visibility grid (1 = visible) over a height x width image.
struct Mask {
  MaskKind kind = MaskKind::CenterLarge;
  std::size_t height = kFaceSide;
  std::size_t width = kFaceSide;
  Tensor visible;  // [height * width]

  std::size_t hidden_count() const;
};

// Geometry for an h x w image (8 x 8 shown):
//   center-small     hides the central h/4 x w/4 block (2 x 2)
//   center-large     hides the central h/2 x w/2 block (4 x 4)
//   periocular-small shows only rows [h/8, 3h/8) (rows 1-2)
//   periocular-large shows only rows [0, h/2) (rows 0-3)
Mask make_mask(MaskKind kind, std::size_t height = kFaceSide, std::size_t width = kFaceSide);

// Arbitrary grid; throws ShapeError unless values are 0/1 with at least one of each.
Mask make_custom_mask(Tensor visible, std::size_t height, std::size_t width);

// Hidden pixels replaced by `fill`. `image` may be [h*w] or [batch x h*w].
Tensor apply_mask(const Tensor& image, const Mask& mask, double fill = 0.0);

}  // namespace rankgan
