#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace trim {

/// Dense row-major tensor of doubles.
class NdArray {
 public:
  NdArray() = default;
  explicit NdArray(std::vector<std::size_t> shape, double fill = 0.0);
  NdArray(std::vector<std::size_t> shape, std::vector<double> data);

  static NdArray vector(std::vector<double> values);
  static NdArray matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static NdArray matrix(std::initializer_list<std::initializer_list<double>> rows);
  static NdArray identity(std::size_t n);

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }

  // Rank-1 arrays behave as a single row.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool all_finite() const;
  NdArray reshaped(std::vector<std::size_t> shape) const;

  friend bool operator==(const NdArray&, const NdArray&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// Matrix product. Each output element accumulates over k in ascending order.
NdArray matmul(const NdArray& a, const NdArray& b);
NdArray transpose(const NdArray& a);

double dot(std::span<const double> a, std::span<const double> b);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
double sum(std::span<const double> a);

/// Paired real/imaginary sequences for the FFT.
struct ComplexSeq {
  std::vector<double> re;
  std::vector<double> im;

  ComplexSeq() = default;
  explicit ComplexSeq(std::size_t n) : re(n, 0.0), im(n, 0.0) {}
  ComplexSeq(std::vector<double> r, std::vector<double> i);
  std::size_t size() const noexcept { return re.size(); }
};

}  // namespace trim
