#include "trim/ndarray.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "trim/error.hpp"

namespace trim {
namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void check_shape(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw DimensionError("NdArray: empty shape");
  for (auto d : shape) {
    if (d == 0) throw DimensionError("NdArray: zero-length dimension");
  }
}

}  // namespace

NdArray::NdArray(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(product(shape_), fill);
}

NdArray::NdArray(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_shape(shape_);
  if (data_.size() != product(shape_)) {
    throw DimensionError("NdArray: data length " + std::to_string(data_.size()) +
                         " does not match shape product " + std::to_string(product(shape_)));
  }
}

NdArray NdArray::vector(std::vector<double> values) {
  const auto n = values.size();
  return NdArray({n}, std::move(values));
}

NdArray NdArray::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return NdArray({rows, cols}, std::move(values));
}

NdArray NdArray::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> values;
  values.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("NdArray::matrix: ragged rows");
    values.insert(values.end(), row.begin(), row.end());
  }
  return matrix(r, c, std::move(values));
}

NdArray NdArray::identity(std::size_t n) {
  NdArray out({n, n});
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

std::size_t NdArray::rows() const noexcept { return shape_.size() >= 2 ? shape_[0] : 1; }

std::size_t NdArray::cols() const noexcept {
  if (shape_.empty()) return 0;
  return shape_.size() >= 2 ? data_.size() / shape_[0] : shape_[0];
}

std::span<double> NdArray::row(std::size_t r) {
  const auto c = cols();
  return std::span<double>(data_).subspan(r * c, c);
}

std::span<const double> NdArray::row(std::size_t r) const {
  const auto c = cols();
  return std::span<const double>(data_).subspan(r * c, c);
}

bool NdArray::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

NdArray NdArray::reshaped(std::vector<std::size_t> shape) const { return NdArray(std::move(shape), data_); }

NdArray matmul(const NdArray& a, const NdArray& b) {
  if (a.rank() != 2 || b.rank() != 2) throw DimensionError("matmul: operands must be rank 2");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ (" + std::to_string(k) + " vs " +
                         std::to_string(b.rows()) + ")");
  }
  NdArray c({m, n});
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* pc = c.data().data();
  // i-k-j order: every c[i][j] still sums its k terms in ascending order.
  // Rows are processed four at a time so each row of b is loaded once per block.
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    double* c0 = pc + i * n;
    double* c1 = c0 + n;
    double* c2 = c1 + n;
    double* c3 = c2 + n;
    for (std::size_t p = 0; p < k; ++p) {
      const double a0 = pa[i * k + p], a1 = pa[(i + 1) * k + p];
      const double a2 = pa[(i + 2) * k + p], a3 = pa[(i + 3) * k + p];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double bv = brow[j];
        c0[j] += a0 * bv;
        c1[j] += a1 * bv;
        c2[j] += a2 * bv;
        c3[j] += a3 * bv;
      }
    }
  }
  for (; i < m; ++i) {
    double* crow = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

NdArray transpose(const NdArray& a) {
  if (a.rank() != 2) throw DimensionError("transpose: rank 2 required");
  const std::size_t m = a.rows(), n = a.cols();
  NdArray t({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) t(j, i) = a(i, j);
  return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("max_abs_diff: length mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double sum(std::span<const double> a) {
  double acc = 0.0;
  for (double v : a) acc += v;
  return acc;
}

ComplexSeq::ComplexSeq(std::vector<double> r, std::vector<double> i) : re(std::move(r)), im(std::move(i)) {
  if (re.size() != im.size()) throw DimensionError("ComplexSeq: re/im length mismatch");
}

}  // namespace trim
