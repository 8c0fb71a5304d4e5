#include "rankgan/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "rankgan/checkpoint.hpp"
#include "rankgan/errors.hpp"
#include "rankgan/rng.hpp"

namespace rankgan {

DatasetKind parse_dataset_kind(std::string_view name) {
  if (name == "gauss1d-pair") return DatasetKind::Gauss1dPair;
  if (name == "gauss2d") return DatasetKind::Gauss2d;
  if (name == "ring8") return DatasetKind::Ring8;
  if (name == "toy-faces") return DatasetKind::ToyFaces;
  throw ConfigError("unknown dataset kind '" + std::string(name) + "'");
}

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Gauss1dPair: return "gauss1d-pair";
    case DatasetKind::Gauss2d: return "gauss2d";
    case DatasetKind::Ring8: return "ring8";
    case DatasetKind::ToyFaces: return "toy-faces";
  }
  return "?";
}

std::size_t data_dim(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Gauss1dPair: return 1;
    case DatasetKind::Gauss2d:
    case DatasetKind::Ring8: return 2;
    case DatasetKind::ToyFaces: return kFaceSide * kFaceSide;
  }
  return 0;
}

std::vector<std::pair<double, double>> ring8_centres() {
  std::vector<std::pair<double, double>> c;
  for (int k = 0; k < 8; ++k) {
    const double a = 2.0 * std::numbers::pi * k / 8.0;
    c.emplace_back(std::cos(a), std::sin(a));
  }
  return c;
}

namespace {

void draw_face(std::span<double> px, Rng& rng) {
  std::uniform_real_distribution<double> skin(-0.2, 0.2);
  std::uniform_real_distribution<double> intensity(0.5, 1.0);
  std::uniform_int_distribution<int> jitter(-1, 1);
  std::uniform_int_distribution<int> mouth_jitter(0, 1);

  const double s = skin(rng);
  const double eye = intensity(rng);
  const double mouth = intensity(rng);
  const int eye_row = 2 + jitter(rng);
  const int eye_shift = jitter(rng);
  const int mouth_row = 5 + mouth_jitter(rng);

  const int side = static_cast<int>(kFaceSide);
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const double dr = (r - 3.5) / 3.8, dc = (c - 3.5) / 3.2;
      px[r * side + c] = dr * dr + dc * dc <= 1.0 ? s : -1.0;
    }
  }
  px[eye_row * side + 2 + eye_shift] = eye;
  px[eye_row * side + 5 + eye_shift] = eye;
  for (int c = 2; c <= 5; ++c) px[mouth_row * side + c] = mouth;
}

}  // namespace

Tensor sample_gauss1d(double mean, double std, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> dist(mean, std);
  Tensor out = Tensor::zeros({n, 1});
  for (double& v : out.data()) v = dist(rng);
  return out;
}

Tensor sample_real(DatasetKind kind, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ShapeError("sample_real: n must be positive");
  Rng rng = make_rng(seed, to_string(kind));
  const std::size_t dim = data_dim(kind);
  Tensor out = Tensor::zeros({n, dim});
  auto d = out.data();
  std::normal_distribution<double> normal(0.0, 1.0);
  switch (kind) {
    case DatasetKind::Gauss1dPair:
      for (std::size_t i = 0; i < n; ++i) {
        const double centre = i < n / 2 ? -kGauss1dMean : kGauss1dMean;
        d[i] = centre + kGauss1dStd * normal(rng);
      }
      break;
    case DatasetKind::Gauss2d: {
      std::bernoulli_distribution coin(0.5);
      for (std::size_t i = 0; i < n; ++i) {
        d[2 * i] = (coin(rng) ? 1.0 : -1.0) + 0.1 * normal(rng);
        d[2 * i + 1] = 0.1 * normal(rng);
      }
      break;
    }
    case DatasetKind::Ring8: {
      const auto centres = ring8_centres();
      std::uniform_int_distribution<int> mode(0, 7);
      for (std::size_t i = 0; i < n; ++i) {
        const auto [cx, cy] = centres[static_cast<std::size_t>(mode(rng))];
        d[2 * i] = cx + kRingStd * normal(rng);
        d[2 * i + 1] = cy + kRingStd * normal(rng);
      }
      break;
    }
    case DatasetKind::ToyFaces:
      for (std::size_t i = 0; i < n; ++i) draw_face(d.subspan(i * dim, dim), rng);
      break;
  }
  return out;
}

SplitIndices split(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng(seed, "split");
  std::shuffle(perm.begin(), perm.end(), rng);

  const auto n_test = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
  const std::size_t n_train_all = n - n_test;
  const auto n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n_train_all)));

  SplitIndices s;
  s.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test),
               perm.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
  s.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), perm.end());
  return s;
}

Dataset make_dataset(DatasetKind kind, std::size_t n, std::uint64_t seed) {
  Dataset data;
  data.kind = kind;
  data.samples = sample_real(kind, n, seed);
  if (kind == DatasetKind::Gauss1dPair) {
    data.labels.assign(n, 0);
    std::fill(data.labels.begin() + static_cast<std::ptrdiff_t>(n / 2), data.labels.end(), 1);
  }
  data.indices = split(n, seed);
  return data;
}

namespace {

Tensor index_tensor(const std::vector<std::size_t>& idx) {
  std::vector<double> v(idx.begin(), idx.end());
  return Tensor({idx.size()}, std::move(v));
}

std::vector<std::size_t> index_vector(const Tensor& t) {
  std::vector<std::size_t> out;
  for (double v : t.data()) out.push_back(static_cast<std::size_t>(v));
  return out;
}

}  // namespace

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  RecordFile file;
  file.kind = std::string(kDatasetKind);
  const std::string_view name = to_string(data.kind);
  file.meta.assign(name.begin(), name.end());
  file.records.push_back({"samples", data.samples});
  if (!data.labels.empty()) {
    const std::size_t n = data.labels.size();
    file.records.push_back({"labels", Tensor({n}, std::vector<double>(data.labels.begin(), data.labels.end()))});
  }
  file.records.push_back({"train", index_tensor(data.indices.train)});
  file.records.push_back({"val", index_tensor(data.indices.val)});
  file.records.push_back({"test", index_tensor(data.indices.test)});
  write_file_bytes(path, encode_records(file));
}

Dataset load_dataset(const std::filesystem::path& path) {
  RecordFile file = decode_records(read_file_bytes(path), kDatasetKind, path.string());
  Dataset data;
  try {
    data.kind = parse_dataset_kind(std::string(file.meta.begin(), file.meta.end()));
  } catch (const ConfigError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
  for (auto& rec : file.records) {
    if (rec.name == "samples") data.samples = std::move(rec.value);
    else if (rec.name == "labels") {
      for (double v : rec.value.data()) data.labels.push_back(static_cast<int>(v));
    } else if (rec.name == "train") data.indices.train = index_vector(rec.value);
    else if (rec.name == "val") data.indices.val = index_vector(rec.value);
    else if (rec.name == "test") data.indices.test = index_vector(rec.value);
    else throw CheckpointError(path.string() + ": unexpected record '" + rec.name + "'");
  }
  if (data.samples.rank() != 2) throw CheckpointError(path.string() + ": missing samples record");
  return data;
}

MaskKind parse_mask_kind(std::string_view name) {
  if (name == "center-small") return MaskKind::CenterSmall;
  if (name == "center-large") return MaskKind::CenterLarge;
  if (name == "periocular-small") return MaskKind::PeriocularSmall;
  if (name == "periocular-large") return MaskKind::PeriocularLarge;
  throw ConfigError("unknown mask kind '" + std::string(name) + "'");
}

std::string_view to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::CenterSmall: return "center-small";
    case MaskKind::CenterLarge: return "center-large";
    case MaskKind::PeriocularSmall: return "periocular-small";
    case MaskKind::PeriocularLarge: return "periocular-large";
  }
  return "?";
}

std::size_t Mask::hidden_count() const {
  return static_cast<std::size_t>(std::count(visible.data().begin(), visible.data().end(), 0.0));
}

Mask make_custom_mask(Tensor visible, std::size_t height, std::size_t width) {
  if (visible.numel() != height * width) {
    throw ShapeError("mask: grid has " + std::to_string(visible.numel()) + " cells, expected " +
                     std::to_string(height * width));
  }
  std::size_t ones = 0, zeros = 0;
  for (double v : visible.data()) {
    if (v == 1.0) ++ones;
    else if (v == 0.0) ++zeros;
    else throw ShapeError("mask: values must be 0 or 1");
  }
  if (ones == 0 || zeros == 0) throw ShapeError("mask: needs at least one visible and one hidden pixel");
  Mask m;
  m.height = height;
  m.width = width;
  m.visible = visible.reshaped({height * width});
  return m;
}

Mask make_mask(MaskKind kind, std::size_t height, std::size_t width) {
  Tensor grid = Tensor::full({height * width}, 1.0);
  auto hide_block = [&](std::size_t bh, std::size_t bw) {
    const std::size_t r0 = (height - bh) / 2, c0 = (width - bw) / 2;
    for (std::size_t r = r0; r < r0 + bh; ++r)
      for (std::size_t c = c0; c < c0 + bw; ++c) grid[r * width + c] = 0.0;
  };
  auto show_rows = [&](std::size_t r0, std::size_t r1) {
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t c = 0; c < width; ++c) grid[r * width + c] = (r >= r0 && r < r1) ? 1.0 : 0.0;
  };
  switch (kind) {
    case MaskKind::CenterSmall: hide_block(height / 4, width / 4); break;
    case MaskKind::CenterLarge: hide_block(height / 2, width / 2); break;
    case MaskKind::PeriocularSmall: show_rows(height / 8, height / 8 + height / 4); break;
    case MaskKind::PeriocularLarge: show_rows(0, height / 2); break;
  }
  Mask m = make_custom_mask(std::move(grid), height, width);
  m.kind = kind;
  return m;
}

Tensor apply_mask(const Tensor& image, const Mask& mask, double fill) {
  const std::size_t px = mask.visible.numel();
  if (image.numel() % px != 0 || image.shape().back() != px) {
    throw ShapeError("apply_mask: image " + shape_str(image.shape()) + " does not match mask of " +
                     std::to_string(px) + " pixels");
  }
  Tensor out = image;
  auto d = out.data();
  auto m = mask.visible.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (m[i % px] == 0.0) d[i] = fill;
  }
  return out;
}

}  // namespace rankgan
