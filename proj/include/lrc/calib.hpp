#pragma once

#include <cstddef>

#include "lrc/matrix.hpp"
#include "lrc/quant.hpp"

namespace lrc {

inline constexpr double kDefaultDampingFactor = 1e-2;

// Streaming second-order statistics of one layer's calibration activations X
// and their quantized counterpart Y = Q_a(X):
//   sigma_x  = X X^T  (+ eps_x I after finalize)
//   sigma_y  = Y Y^T  (+ eps_y I after finalize)
//   sigma_xy = X Y^T
// Batches are folded serially in 64-bit arithmetic.
class CalibStats {
 public:
  CalibStats() = default;
  explicit CalibStats(std::size_t dim);

  // Rebuild from persisted matrices (already finalized or not).
  static CalibStats from_parts(DenseMatrix sigma_x, DenseMatrix sigma_y, DenseMatrix sigma_xy,
                               std::size_t samples, double eps_x, double eps_y, bool finalized);

  void accumulate(const DenseMatrix& x_batch, const ActQuantConfig& act);

  // Adds eps I to sigma_x and sigma_y with eps = factor / d * Tr(raw). A zero
  // factor leaves the statistics undamped.
  void finalize(double damping_factor = kDefaultDampingFactor);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t samples() const noexcept { return samples_; }
  bool finalized() const noexcept { return finalized_; }
  double eps_x() const noexcept { return eps_x_; }
  double eps_y() const noexcept { return eps_y_; }

  const DenseMatrix& sigma_x() const noexcept { return sigma_x_; }
  const DenseMatrix& sigma_y() const noexcept { return sigma_y_; }
  const DenseMatrix& sigma_xy() const noexcept { return sigma_xy_; }

  // Throws NotFinalized unless finalize() has run.
  void require_finalized(const char* what) const;

 private:
  std::size_t dim_ = 0;
  std::size_t samples_ = 0;
  double eps_x_ = 0.0;
  double eps_y_ = 0.0;
  bool finalized_ = false;
  DenseMatrix sigma_x_;
  DenseMatrix sigma_y_;
  DenseMatrix sigma_xy_;
};

}  // namespace lrc
