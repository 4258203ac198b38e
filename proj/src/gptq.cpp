#include "lrc/gptq.hpp"

#include <algorithm>
#include <string>
#include <vector>

#include "lrc/errors.hpp"
#include "lrc/linalg.hpp"

namespace lrc {

DenseMatrix build_target_weight(const DenseMatrix& w, const DenseMatrix& u,
                                const DenseMatrix& v, const DenseMatrix& sigma_xy,
                                const LowerTriangular& sigma_y_chol) {
  if (u.rows() != w.rows() || v.rows() != w.cols() || u.cols() != v.cols() ||
      sigma_xy.rows() != w.cols() || sigma_xy.cols() != w.cols() ||
      sigma_y_chol.dim() != w.cols()) {
    fail(ErrorKind::DimensionMismatch, "build_target_weight: non-conformable inputs");
  }
  DenseMatrix residual = w;
  if (u.cols() > 0) residual = linalg::subtract(w, linalg::matmul_nt(u, v));
  // Solve Sigma_y Z = (residual Sigma_xy)^T, then W~ = Z^T.
  const DenseMatrix rhs = linalg::transpose(linalg::matmul(residual, sigma_xy));
  return linalg::transpose(linalg::cholesky_solve(sigma_y_chol, rhs));
}

GptqResult gptq_solve(const DenseMatrix& target, const DenseMatrix& sigma_y,
                      const GptqConfig& cfg) {
  const std::size_t rows = target.rows();
  const std::size_t cols = target.cols();
  if (sigma_y.rows() != cols || sigma_y.cols() != cols) {
    fail(ErrorKind::DimensionMismatch, "gptq_solve: Hessian is " +
                                           std::to_string(sigma_y.rows()) + "x" +
                                           std::to_string(sigma_y.cols()) + ", expected " +
                                           std::to_string(cols));
  }
  if (cfg.block_size == 0) fail(ErrorKind::InvalidArgument, "gptq block_size must be >= 1");

  // Upper Cholesky factor R of Sigma_y^{-1} (Sigma_y^{-1} = R^T R), stored as
  // the lower factor L = R^T, so R(i, j) = L(j, i).
  const LowerTriangular sigma_chol = linalg::cholesky(sigma_y);
  DenseMatrix inverse = linalg::cholesky_solve(sigma_chol, DenseMatrix::identity(cols));
  linalg::symmetrize(inverse);
  const DenseMatrix upper = linalg::transpose(linalg::cholesky(inverse).to_dense());

  const std::size_t group = effective_groupsize(cfg.grid, cfg.groupsize, cols);
  GptqResult result;
  QuantizedWeight& q = result.weight;
  q.grid = cfg.grid;
  q.groupsize = group;
  q.scales = weight_scales(target, cfg.grid, group);
  q.codes = CodeMatrix{rows, cols, std::vector<std::int32_t>(rows * cols)};

  std::vector<double> work(cols);
  std::vector<double> err(cfg.block_size);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy(target.row(r).begin(), target.row(r).end(), work.begin());
    for (std::size_t start = 0; start < cols; start += cfg.block_size) {
      const std::size_t stop = std::min(cols, start + cfg.block_size);
      for (std::size_t i = start; i < stop; ++i) {
        const double scale = q.scales(r, i / group);
        const std::int32_t code = quantize_code(work[i], scale, cfg.grid);
        q.codes(r, i) = code;
        const double e = (work[i] - code * scale) / upper(i, i);
        err[i - start] = e;
        auto urow = upper.row(i);
        for (std::size_t j = i + 1; j < stop; ++j) work[j] -= e * urow[j];
      }
      // Deferred update of the columns after this block.
      for (std::size_t i = start; i < stop; ++i) {
        const double e = err[i - start];
        auto urow = upper.row(i);
        for (std::size_t j = stop; j < cols; ++j) work[j] -= e * urow[j];
      }
    }
  }

  result.objective = quantization_objective(target, dequantize(q), sigma_y);
  return result;
}

double quantization_objective(const DenseMatrix& target, const DenseMatrix& dequantized,
                              const DenseMatrix& sigma) {
  linalg::require_same_shape(target, dequantized, "quantization_objective");
  if (sigma.rows() != target.cols() || sigma.cols() != target.cols()) {
    fail(ErrorKind::DimensionMismatch, "quantization_objective: Hessian dimension mismatch");
  }
  const DenseMatrix diff = linalg::subtract(target, dequantized);
  return std::max(0.0, linalg::inner(linalg::matmul(diff, sigma), diff));
}

}  // namespace lrc
