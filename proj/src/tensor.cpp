#include "rankgan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "rankgan/errors.hpp"

namespace rankgan {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Shape broadcast_shapes(const Shape& a, const Shape& b, std::string_view op) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t k = 0; k < r; ++k) {
    const std::size_t da = k < r - a.size() ? 1 : a[k - (r - a.size())];
    const std::size_t db = k < r - b.size() ? 1 : b[k - (r - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": cannot broadcast shapes " + shape_str(a) + " and " +
                       shape_str(b));
    }
    out[k] = da == 1 ? db : da;
  }
  return out;
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw ShapeError("Tensor: shape " + shape_str(shape_) + " holds " +
                     std::to_string(shape_numel(shape_)) + " values but " +
                     std::to_string(data_.size()) + " were given");
  }
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n_rows = rows.size();
  const std::size_t n_cols = n_rows ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(n_rows * n_cols);
  for (const auto& row : rows) {
    if (row.size() != n_cols) throw ShapeError("Tensor::matrix: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({n_rows, n_cols}, std::move(data));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("Tensor::dim: axis " + std::to_string(axis) + " out of range for " +
                     shape_str(shape_));
  }
  return shape_[axis];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw ShapeError("Tensor::at: expected rank 2, got " + shape_str(shape_));
  return data_[row * shape_[1] + col];
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ShapeError("Tensor::item: tensor of shape " + shape_str(shape_) + " is not a single value");
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(shape_) + " as " + shape_str(shape));
  }
  return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> indices) {
  if (t.rank() != 2) throw ShapeError("gather_rows: expected rank 2, got " + shape_str(t.shape()));
  const std::size_t cols = t.dim(1);
  std::vector<double> out;
  out.reserve(indices.size() * cols);
  for (std::size_t idx : indices) {
    if (idx >= t.dim(0)) throw ShapeError("gather_rows: row index out of range");
    auto row = t.data().subspan(idx * cols, cols);
    out.insert(out.end(), row.begin(), row.end());
  }
  return Tensor({indices.size(), cols}, std::move(out));
}

namespace {

// Strides of `in` laid against output shape `out`; 0 on stretched axes.
std::vector<std::size_t> aligned_strides(const Shape& in, const Shape& out) {
  const std::size_t r = out.size();
  std::vector<std::size_t> strides(r, 0);
  std::size_t stride = 1;
  for (std::size_t k = in.size(); k-- > 0;) {
    const std::size_t ok = k + (r - in.size());
    strides[ok] = in[k] == 1 ? 0 : stride;
    stride *= in[k];
  }
  return strides;
}

template <typename F>
Tensor map2(const Tensor& a, const Tensor& b, F f, std::string_view op) {
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.numel());
    auto da = a.data();
    auto db = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(da[i], db[i]);
    return Tensor(a.shape(), std::move(out));
  }
  Shape shape = broadcast_shapes(a.shape(), b.shape(), op);
  const std::size_t n = shape_numel(shape);
  std::vector<double> out(n);
  const auto sa = aligned_strides(a.shape(), shape);
  const auto sb = aligned_strides(b.shape(), shape);
  const std::size_t r = shape.size();
  std::vector<std::size_t> idx(r, 0);
  std::size_t oa = 0, ob = 0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = f(da[oa], db[ob]);
    for (std::size_t k = r; k-- > 0;) {
      ++idx[k];
      oa += sa[k];
      ob += sb[k];
      if (idx[k] < shape[k]) break;
      oa -= sa[k] * shape[k];
      ob -= sb[k] * shape[k];
      idx[k] = 0;
    }
  }
  return Tensor(std::move(shape), std::move(out));
}

}  // namespace

namespace kernels {

Tensor add(const Tensor& a, const Tensor& b) {
  return map2(a, b, [](double x, double y) { return x + y; }, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return map2(a, b, [](double x, double y) { return x - y; }, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return map2(a, b, [](double x, double y) { return x * y; }, "mul");
}

Tensor div(const Tensor& a, const Tensor& b) {
  return map2(a, b, [](double x, double y) { return x / y; }, "div");
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.data().begin(), a.data().end());
  for (double& v : out) v *= s;
  return Tensor(a.shape(), std::move(out));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = da[i * k + p];
      if (av == 0.0) continue;
      const double* brow = db.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return Tensor({m, n}, std::move(out));
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_str(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  auto da = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = da[i * n + j];
  return Tensor({n, m}, std::move(out));
}

Tensor broadcast_to(const Tensor& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  if (broadcast_shapes(a.shape(), shape, "broadcast_to") != shape) {
    throw ShapeError("broadcast_to: cannot broadcast " + shape_str(a.shape()) + " to " +
                     shape_str(shape));
  }
  return map2(a, Tensor::zeros(shape), [](double x, double) { return x; }, "broadcast_to");
}

Tensor sum_to(const Tensor& a, const Shape& shape) {
  if (a.shape() == shape) return a;
  if (broadcast_shapes(shape, a.shape(), "sum_to") != a.shape()) {
    throw ShapeError("sum_to: cannot reduce " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> out(shape_numel(shape), 0.0);
  const auto st = aligned_strides(shape, a.shape());
  const Shape& full = a.shape();
  const std::size_t r = full.size();
  std::vector<std::size_t> idx(r, 0);
  std::size_t o = 0;
  auto da = a.data();
  for (std::size_t i = 0; i < da.size(); ++i) {
    out[o] += da[i];
    for (std::size_t k = r; k-- > 0;) {
      ++idx[k];
      o += st[k];
      if (idx[k] < full[k]) break;
      o -= st[k] * full[k];
      idx[k] = 0;
    }
  }
  return Tensor(shape, std::move(out));
}

}  // namespace kernels

}  // namespace rankgan
