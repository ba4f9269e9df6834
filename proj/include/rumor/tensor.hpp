#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rumor {

// Dense row-major matrix of 64-bit reals. Vectors are 1 x k.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  // Row-major nested literal, e.g. Tensor::of({{1, 2}, {3, 4}}).
  static Tensor of(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  void fill(double v);
  bool all_finite() const;
  // Throws NumericError naming `what` if any element is NaN or infinite.
  void require_finite(std::string_view what) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::string shape_string(const Tensor& t);

namespace kernels {

// out = a * b
Tensor matmul(const Tensor& a, const Tensor& b);
// out = a^T * b
Tensor matmul_tn(const Tensor& a, const Tensor& b);
// out = a * b^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);

// Accumulating variants used by the backward passes: out += ...
void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& out);
void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& out);

void add_inplace(Tensor& out, const Tensor& x, double scale = 1.0);

}  // namespace kernels
}  // namespace rumor
