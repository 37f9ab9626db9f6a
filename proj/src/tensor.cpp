#include "hsagnn/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "hsagnn/errors.hpp"

namespace hsagnn {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw UsageError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string());
  }
}

Tensor Tensor::row(std::vector<double> values) {
  const auto n = values.size();
  return Tensor(1, n, std::move(values));
}

double Tensor::item() const {
  if (data_.size() != 1) throw UsageError("item() on tensor of shape " + shape_string());
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

std::string Tensor::shape_string() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

namespace {

void check_gemm(const char* op, bool ok, const Tensor& a, const Tensor& b, const Tensor& out) {
  if (!ok) {
    throw UsageError(std::string(op) + ": shape mismatch " + a.shape_string() + ", " +
                     b.shape_string() + " -> " + out.shape_string());
  }
}

}  // namespace

void gemm_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  check_gemm("gemm", b.rows() == k && out.rows() == m && out.cols() == n, a, b, out);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = po + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

void gemm_nt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  check_gemm("gemm_nt", b.cols() == k && out.rows() == m && out.cols() == n, a, b, out);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = pb + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      po[i * n + j] += s;
    }
  }
}

void gemm_tn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  check_gemm("gemm_tn", b.rows() == k && out.rows() == m && out.cols() == n, a, b, out);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = pa + p * m;
    const double* brow = pb + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* orow = po + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

}  // namespace hsagnn
