#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "lrc/matrix.hpp"

namespace lrc {

// Orthogonal rotation Q = H D, where H is the normalized Sylvester-Hadamard
// matrix of order dim and D an optional random +-1 diagonal.
class RotationPlan {
 public:
  static RotationPlan hadamard(std::size_t dim);
  static RotationPlan randomized(std::size_t dim, std::uint64_t seed);

  std::size_t dim() const noexcept { return dim_; }
  bool normalized() const noexcept { return normalized_; }
  const std::optional<std::vector<double>>& sign_diag() const noexcept { return signs_; }

  // The plan as an explicit dim x dim matrix.
  DenseMatrix matrix() const;

 private:
  RotationPlan(std::size_t dim, std::optional<std::vector<double>> signs);

  std::size_t dim_;
  bool normalized_ = true;
  std::optional<std::vector<double>> signs_;
};

bool is_power_of_two(std::size_t n) noexcept;

// Q X, column by column with in-place butterflies (O(d log d) per column).
DenseMatrix apply_rotation(const DenseMatrix& x, const RotationPlan& plan);

// W Q^T, so that (W Q^T)(Q x) = W x.
DenseMatrix fuse_into_layer(const DenseMatrix& w, const RotationPlan& plan);

struct IncoherenceReport {
  double max_abs_before = 0.0;
  double max_abs_after = 0.0;
  double kurtosis_before = 0.0;
  double kurtosis_after = 0.0;
  double energy_before = 0.0;  // ||X||_F
  double energy_after = 0.0;
};

// Pearson kurtosis E[x^4] / E[x^2]^2 over all entries (0 for an all-zero matrix).
double kurtosis(const DenseMatrix& x);

IncoherenceReport incoherence_report(const DenseMatrix& x, const DenseMatrix& x_rotated);

}  // namespace lrc
