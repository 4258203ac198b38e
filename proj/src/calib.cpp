#include "lrc/calib.hpp"

#include <string>

#include "lrc/errors.hpp"
#include "lrc/linalg.hpp"

namespace lrc {

CalibStats::CalibStats(std::size_t dim)
    : dim_(dim), sigma_x_(dim, dim), sigma_y_(dim, dim), sigma_xy_(dim, dim) {}

CalibStats CalibStats::from_parts(DenseMatrix sigma_x, DenseMatrix sigma_y,
                                  DenseMatrix sigma_xy, std::size_t samples, double eps_x,
                                  double eps_y, bool finalized) {
  const std::size_t d = sigma_x.rows();
  for (const DenseMatrix* m : {&sigma_x, &sigma_y, &sigma_xy}) {
    if (m->rows() != d || m->cols() != d) {
      fail(ErrorKind::DimensionMismatch, "calibration statistics must be square and equal-sized");
    }
  }
  CalibStats s;
  s.dim_ = d;
  s.samples_ = samples;
  s.eps_x_ = eps_x;
  s.eps_y_ = eps_y;
  s.finalized_ = finalized;
  s.sigma_x_ = std::move(sigma_x);
  s.sigma_y_ = std::move(sigma_y);
  s.sigma_xy_ = std::move(sigma_xy);
  return s;
}

void CalibStats::accumulate(const DenseMatrix& x_batch, const ActQuantConfig& act) {
  if (finalized_) fail(ErrorKind::AlreadyFinalized, "statistics already finalized");
  if (x_batch.rows() != dim_) {
    fail(ErrorKind::DimensionMismatch, "activation batch has " +
                                           std::to_string(x_batch.rows()) +
                                           " channels, statistics expect " +
                                           std::to_string(dim_));
  }
  if (x_batch.cols() == 0) return;
  const DenseMatrix y = rtn_quantize_activations(x_batch, act);
  linalg::add_in_place(sigma_x_, linalg::gram(x_batch));
  linalg::add_in_place(sigma_y_, linalg::gram(y));
  linalg::add_in_place(sigma_xy_, linalg::matmul_nt(x_batch, y));
  samples_ += x_batch.cols();
}

void CalibStats::finalize(double damping_factor) {
  if (finalized_) fail(ErrorKind::AlreadyFinalized, "statistics already finalized");
  if (samples_ == 0) fail(ErrorKind::EmptyStats, "no calibration samples accumulated");
  const double d = static_cast<double>(dim_);
  eps_x_ = damping_factor / d * linalg::trace(sigma_x_);
  eps_y_ = damping_factor / d * linalg::trace(sigma_y_);
  linalg::add_diagonal(sigma_x_, eps_x_);
  linalg::add_diagonal(sigma_y_, eps_y_);
  finalized_ = true;
}

void CalibStats::require_finalized(const char* what) const {
  if (!finalized_) {
    fail(ErrorKind::NotFinalized, std::string(what) + ": statistics are not finalized");
  }
}

}  // namespace lrc
