#include "lrc/matrix.hpp"

#include <cmath>
#include <string>

#include "lrc/errors.hpp"

namespace lrc {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::RankOutOfBounds: return "RankOutOfBounds";
    case ErrorKind::BadGroupsize: return "BadGroupsize";
    case ErrorKind::EmptyCandidates: return "EmptyCandidates";
    case ErrorKind::AlreadyFinalized: return "AlreadyFinalized";
    case ErrorKind::EmptyStats: return "EmptyStats";
    case ErrorKind::NotFinalized: return "NotFinalized";
    case ErrorKind::BadIterationCount: return "BadIterationCount";
    case ErrorKind::DimNotPowerOfTwo: return "DimNotPowerOfTwo";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Format: return "FormatError";
  }
  return "Unknown";
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    fail(ErrorKind::DimensionMismatch,
         "matrix data length " + std::to_string(data_.size()) + " does not match " +
             std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) fail(ErrorKind::DimensionMismatch, "ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> diag) {
  DenseMatrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

bool DenseMatrix::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

LowerTriangular::LowerTriangular(std::size_t dim)
    : dim_(dim), data_(dim * (dim + 1) / 2, 0.0) {}

DenseMatrix LowerTriangular::to_dense() const {
  DenseMatrix m(dim_, dim_);
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j <= i; ++j) m(i, j) = (*this)(i, j);
  return m;
}

}  // namespace lrc
