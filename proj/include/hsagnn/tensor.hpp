#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hsagnn {

/// Dense row-major matrix of doubles. Vectors are 1×n or n×1 matrices;
/// scalars are 1×1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor(1, 1, v); }
  static Tensor row(std::vector<double> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::vector<std::size_t> shape() const { return {rows_, cols_}; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row_span(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  double item() const;
  bool all_finite() const;
  void fill(double v);
  std::string shape_string() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// out += a · b  (a: m×k, b: k×n, out: m×n)
void gemm_acc(const Tensor& a, const Tensor& b, Tensor& out);
/// out += a · bᵀ (a: m×k, b: n×k)
void gemm_nt_acc(const Tensor& a, const Tensor& b, Tensor& out);
/// out += aᵀ · b (a: k×m, b: k×n)
void gemm_tn_acc(const Tensor& a, const Tensor& b, Tensor& out);

}  // namespace hsagnn
