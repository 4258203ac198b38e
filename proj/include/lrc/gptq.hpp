#pragma once

#include <cstddef>
#include <optional>

#include "lrc/matrix.hpp"
#include "lrc/quant.hpp"

namespace lrc {

struct GptqConfig {
  QuantGrid grid = QuantGrid::with_bits(4);
  std::optional<std::size_t> groupsize;
  // Columns processed before the deferred error update is applied to the
  // remaining columns.
  std::size_t block_size = 32;
};

struct GptqResult {
  QuantizedWeight weight;
  double objective = 0.0;  // Tr((W~ - W^) Sigma_y (W~ - W^)^T)
};

// Optimal unconstrained weight for fixed low-rank factors:
//   (W - U V^T) Sigma_xy Sigma_y^{-1}
// evaluated with two triangular solves against the Cholesky factor of the
// damped Sigma_y. U and V may have zero columns.
DenseMatrix build_target_weight(const DenseMatrix& w, const DenseMatrix& u,
                                const DenseMatrix& v, const DenseMatrix& sigma_xy,
                                const LowerTriangular& sigma_y_chol);

// Greedy column-by-column quantization with error feedback through the
// Cholesky factor of Sigma_y^{-1}. Columns are visited in natural order and
// scales are fixed from the target before the loop, so a diagonal Sigma_y
// reproduces round-to-nearest exactly.
GptqResult gptq_solve(const DenseMatrix& target, const DenseMatrix& sigma_y,
                      const GptqConfig& cfg);

// Tr((W~ - W^) Sigma (W~ - W^)^T)
double quantization_objective(const DenseMatrix& target, const DenseMatrix& dequantized,
                              const DenseMatrix& sigma);

}  // namespace lrc
