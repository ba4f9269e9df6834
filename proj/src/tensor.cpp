#include "rumor/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>

#include "rumor/errors.hpp"

namespace rumor {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

MapC view(const Tensor& t) {
  return MapC(t.data(), static_cast<Eigen::Index>(t.rows()),
              static_cast<Eigen::Index>(t.cols()));
}
Map view(Tensor& t) {
  return Map(t.data(), static_cast<Eigen::Index>(t.rows()),
             static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw NumericError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                     shape_string(b));
}

}  // namespace

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw NumericError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
  }
}

Tensor Tensor::of(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw NumericError("Tensor::of: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::require_finite(std::string_view what) const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (!std::isfinite(data_[i])) {
      throw NumericError("non-finite value in " + std::string(what) + " at (" +
                         std::to_string(i / std::max<std::size_t>(cols_, 1)) + "," +
                         std::to_string(i % std::max<std::size_t>(cols_, 1)) + ")");
    }
  }
}

std::string shape_string(const Tensor& t) {
  return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

namespace kernels {

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  Tensor out(a.rows(), b.cols());
  if (a.cols() == 0) return out;
  view(out).noalias() = view(a) * view(b);
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  Tensor out(a.cols(), b.cols());
  matmul_tn_acc(a, b, out);
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  Tensor out(a.rows(), b.rows());
  matmul_nt_acc(a, b, out);
  return out;
}

void matmul_tn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  if (a.rows() != b.rows() || out.rows() != a.cols() || out.cols() != b.cols()) {
    shape_mismatch("matmul_tn", a, b);
  }
  if (a.rows() == 0) return;
  view(out).noalias() += view(a).transpose() * view(b);
}

void matmul_nt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  if (a.cols() != b.cols() || out.rows() != a.rows() || out.cols() != b.rows()) {
    shape_mismatch("matmul_nt", a, b);
  }
  if (a.cols() == 0) return;
  view(out).noalias() += view(a) * view(b).transpose();
}

void add_inplace(Tensor& out, const Tensor& x, double scale) {
  if (!out.same_shape(x)) shape_mismatch("add", out, x);
  double* o = out.data();
  const double* v = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) o[i] += scale * v[i];
}

}  // namespace kernels
}  // namespace rumor
