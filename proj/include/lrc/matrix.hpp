#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace lrc {

// Row-major dense matrix of 64-bit reals. Holds every real-valued quantity of
// the solver: weights (d_out x d_in), activations (d_in x n, one token per
// column), low-rank factors and covariance statistics.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  bool is_square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool all_finite() const noexcept;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Packed lower-triangular factor; entry (i, j) with j <= i.
class LowerTriangular {
 public:
  LowerTriangular() = default;
  explicit LowerTriangular(std::size_t dim);

  std::size_t dim() const noexcept { return dim_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * (i + 1) / 2 + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * (i + 1) / 2 + j];
  }

  std::span<const double> packed() const noexcept { return data_; }

  DenseMatrix to_dense() const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

// Top-k eigenpairs of a symmetric matrix; values non-increasing, vectors are
// the matching orthonormal columns.
struct EigPair {
  DenseMatrix vectors;
  std::vector<double> values;
};

}  // namespace lrc
