#include "lrc/lrc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lrc/errors.hpp"
#include "lrc/linalg.hpp"

namespace lrc {
namespace {

using linalg::matmul;
using linalg::matmul_nt;
using linalg::matmul_tn;
using linalg::transpose;

void require_rank(std::size_t k, const DenseMatrix& w, const char* what) {
  const std::size_t limit = std::min(w.rows(), w.cols());
  if (k < 1 || k > limit) {
    fail(ErrorKind::RankOutOfBounds, std::string(what) + ": rank " + std::to_string(k) +
                                         " outside [1, " + std::to_string(limit) + "]");
  }
}

void require_layer_shape(const DenseMatrix& w, const CalibStats& stats, const char* what) {
  if (w.cols() != stats.dim()) {
    fail(ErrorKind::DimensionMismatch, std::string(what) + ": weight has " +
                                           std::to_string(w.cols()) +
                                           " input channels, statistics have " +
                                           std::to_string(stats.dim()));
  }
}

DenseMatrix low_rank_product(const DenseMatrix& u, const DenseMatrix& v) {
  if (u.cols() == 0) return DenseMatrix(u.rows(), v.rows());
  return matmul_nt(u, v);
}

DenseMatrix symmetric_part(DenseMatrix m) {
  linalg::symmetrize(m);
  return m;
}

LowRankPair update_lr_factored(const DenseMatrix& w, const DenseMatrix& w_hat,
                               const CalibStats& stats, const LowerTriangular& lx,
                               std::size_t k) {
  const DenseMatrix w_sigma_xy = matmul(w, stats.sigma_xy());
  const DenseMatrix cross = matmul_nt(stats.sigma_xy(), w_hat);  // Sxy W^^T

  ScatterMatrices sc;
  sc.sigma1 = symmetric_part(matmul_nt(matmul(w, stats.sigma_x()), w));
  const DenseMatrix p = matmul_nt(w_sigma_xy, w_hat);  // W Sxy W^^T
  sc.sigma3 = linalg::add(p, transpose(p));
  const DenseMatrix s = linalg::solve_triangular(lx, cross, linalg::TriangularSide::Lower);
  sc.sigma2 = symmetric_part(matmul_tn(s, s));

  DenseMatrix sigma = linalg::subtract(linalg::add(sc.sigma1, sc.sigma2), sc.sigma3);
  linalg::symmetrize(sigma);
  DenseMatrix u = linalg::top_k_eigvecs(sigma, k).vectors;

  // V = [W^T - Sx^{-1} Sxy W^^T] U
  const DenseMatrix correction = linalg::cholesky_solve(lx, cross);
  DenseMatrix v = matmul(linalg::subtract(transpose(w), correction), u);
  return {std::move(u), std::move(v), std::move(sc)};
}

InitResult init_lr_factored(const DenseMatrix& w, const CalibStats& stats,
                            const LowerTriangular& ly, std::size_t k) {
  ScatterMatrices sc;
  sc.sigma1 = symmetric_part(matmul_nt(matmul(w, stats.sigma_x()), w));
  // S = Ly^{-1} Sxy^T W^T = Ly^{-1} (W Sxy)^T
  const DenseMatrix s = linalg::solve_triangular(ly, transpose(matmul(w, stats.sigma_xy())),
                                                 linalg::TriangularSide::Lower);
  sc.sigma2 = symmetric_part(matmul_tn(s, s));
  sc.sigma_init = symmetric_part(linalg::subtract(sc.sigma1, sc.sigma2));

  InitResult out;
  out.u = linalg::top_k_eigvecs(sc.sigma_init, k).vectors;
  out.v = matmul_tn(w, out.u);
  out.target = build_target_weight(w, out.u, out.v, stats.sigma_xy(), ly);
  out.objective = lrc_objective(w, out.target, out.u, out.v, stats);
  out.scatter = std::move(sc);
  return out;
}

}  // namespace

double lrc_objective(const DenseMatrix& w, const DenseMatrix& w_hat, const DenseMatrix& u,
                     const DenseMatrix& v, const CalibStats& stats) {
  linalg::require_same_shape(w, w_hat, "lrc_objective");
  require_layer_shape(w, stats, "lrc_objective");
  if (u.rows() != w.rows() || v.rows() != w.cols() || u.cols() != v.cols()) {
    fail(ErrorKind::DimensionMismatch, "lrc_objective: low-rank factors do not match weight");
  }
  const DenseMatrix a = linalg::subtract(w, low_rank_product(u, v));
  const double xx = linalg::inner(matmul(a, stats.sigma_x()), a);
  const double xy = linalg::inner(matmul(a, stats.sigma_xy()), w_hat);
  const double yy = linalg::inner(matmul(w_hat, stats.sigma_y()), w_hat);
  return std::max(0.0, xx - 2.0 * xy + yy);
}

InitResult init_lr(const DenseMatrix& w, const CalibStats& stats, std::size_t k) {
  stats.require_finalized("init_lr");
  require_layer_shape(w, stats, "init_lr");
  require_rank(k, w, "init_lr");
  return init_lr_factored(w, stats, linalg::cholesky(stats.sigma_y()), k);
}

LowRankPair update_lr(const DenseMatrix& w, const DenseMatrix& w_hat, const CalibStats& stats,
                      std::size_t k) {
  stats.require_finalized("update_lr");
  require_layer_shape(w, stats, "update_lr");
  linalg::require_same_shape(w, w_hat, "update_lr");
  require_rank(k, w, "update_lr");
  return update_lr_factored(w, w_hat, stats, linalg::cholesky(stats.sigma_x()), k);
}

LrcSolution lrc_quantize_layer(const DenseMatrix& w, const CalibStats& stats,
                               const LrcConfig& cfg) {
  stats.require_finalized("lrc_quantize_layer");
  require_layer_shape(w, stats, "lrc_quantize_layer");
  if (cfg.iterations < 1) {
    fail(ErrorKind::BadIterationCount, "lrc_quantize_layer needs at least one iteration");
  }
  const std::size_t k = cfg.rank;
  if (k > 0) require_rank(k, w, "lrc_quantize_layer");

  const LowerTriangular ly = linalg::cholesky(stats.sigma_y());
  const LowerTriangular lx = linalg::cholesky(stats.sigma_x());

  LrcSolution sol;
  if (k > 0) {
    InitResult init = init_lr_factored(w, stats, ly, k);
    sol.u = std::move(init.u);
    sol.v = std::move(init.v);
    sol.relaxed_objective = init.objective;
  } else {
    sol.u = DenseMatrix(w.rows(), 0);
    sol.v = DenseMatrix(w.cols(), 0);
    sol.relaxed_objective =
        lrc_objective(w, build_target_weight(w, sol.u, sol.v, stats.sigma_xy(), ly), sol.u,
                      sol.v, stats);
  }

  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    const DenseMatrix target = build_target_weight(w, sol.u, sol.v, stats.sigma_xy(), ly);
    sol.weight = gptq_solve(target, stats.sigma_y(), cfg.gptq).weight;
    const DenseMatrix w_hat = dequantize(sol.weight);
    sol.objective_trace.push_back(lrc_objective(w, w_hat, sol.u, sol.v, stats));

    if (k > 0) {
      LowRankPair lr = update_lr_factored(w, w_hat, stats, lx, k);
      sol.u = std::move(lr.u);
      sol.v = std::move(lr.v);
    }
    sol.objective_trace.push_back(lrc_objective(w, w_hat, sol.u, sol.v, stats));
  }
  sol.iterations = cfg.iterations;
  return sol;
}

SvdPair svd_baseline(const DenseMatrix& w, const DenseMatrix& w_hat, std::size_t k) {
  linalg::require_same_shape(w, w_hat, "svd_baseline");
  require_rank(k, w, "svd_baseline");
  const DenseMatrix err = linalg::subtract(w, w_hat);
  const EigPair eig = linalg::top_k_eigvecs(linalg::gram(err), k);
  // Right singular directions E^T u_i; unnormalized until divided by sigma_i.
  const DenseMatrix right = matmul_tn(err, eig.vectors);

  SvdPair out{DenseMatrix(w.rows(), k), DenseMatrix(w.cols(), k)};
  for (std::size_t c = 0; c < k; ++c) {
    const double sigma = std::sqrt(std::max(0.0, eig.values[c]));
    if (sigma == 0.0) continue;
    for (std::size_t r = 0; r < w.rows(); ++r) out.u(r, c) = eig.vectors(r, c) * sigma;
    for (std::size_t r = 0; r < w.cols(); ++r) out.v(r, c) = right(r, c) / sigma;
  }
  return out;
}

InitResult oracle_relaxed(const DenseMatrix& w, const CalibStats& stats, std::size_t k) {
  return init_lr(w, stats, k);
}

}  // namespace lrc
