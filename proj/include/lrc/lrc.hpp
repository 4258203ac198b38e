#pragma once

#include <cstddef>
#include <vector>

#include "lrc/calib.hpp"
#include "lrc/gptq.hpp"
#include "lrc/matrix.hpp"
#include "lrc/quant.hpp"

// Low-rank correction: jointly fit a quantized weight W^ acting on quantized
// activations Y and a full-precision rank-k pair (U, V) acting on X so that
//   W X ~= W^ Y + U V^T X.
namespace lrc {

// Intermediate symmetric matrices of the low-rank updates. Unused entries are
// left empty.
struct ScatterMatrices {
  DenseMatrix sigma1;      // W Sigma_x W^T
  DenseMatrix sigma2;      // S^T S (whitened cross term)
  DenseMatrix sigma3;      // W^ Sigma_xy^T W^T + W Sigma_xy W^^T
  DenseMatrix sigma_init;  // sigma1 - sigma2 for the relaxed problem
};

struct LowRankPair {
  DenseMatrix u;  // d_out x k, orthonormal columns
  DenseMatrix v;  // d_in x k
  ScatterMatrices scatter;
};

struct InitResult {
  DenseMatrix u;
  DenseMatrix v;
  DenseMatrix target;  // unconstrained optimal weight for (U, V)
  ScatterMatrices scatter;
  double objective = 0.0;  // relaxed objective at (target, U, V)
};

struct LrcConfig {
  std::size_t rank = 1;        // 0 disables the low-rank correction
  std::size_t iterations = 1;  // T >= 1
  GptqConfig gptq;
};

struct LrcSolution {
  QuantizedWeight weight;
  DenseMatrix u;
  DenseMatrix v;
  // Objective after every half-step: [quant_1, lr_1, quant_2, lr_2, ...].
  std::vector<double> objective_trace;
  std::size_t iterations = 0;
  double relaxed_objective = 0.0;  // objective of the initialization
};

// ||W X - W^ Y - U V^T X||_F^2 expanded in the (damped) statistics:
//   Tr(A Sx A^T) - 2 Tr(A Sxy W^^T) + Tr(W^ Sy W^^T),  A = W - U V^T.
// Clamped at zero to absorb cancellation noise.
double lrc_objective(const DenseMatrix& w, const DenseMatrix& w_hat, const DenseMatrix& u,
                     const DenseMatrix& v, const CalibStats& stats);

// Closed-form solution of the problem with W^ unconstrained: U spans the top-k
// eigenvectors of W (Sx - Sxy Sy^{-1} Sxy^T) W^T, V = W^T U.
InitResult init_lr(const DenseMatrix& w, const CalibStats& stats, std::size_t k);

// Exact minimizer over (U, V) for a fixed quantized weight.
LowRankPair update_lr(const DenseMatrix& w, const DenseMatrix& w_hat, const CalibStats& stats,
                      std::size_t k);

LrcSolution lrc_quantize_layer(const DenseMatrix& w, const CalibStats& stats,
                               const LrcConfig& cfg);

// Best rank-k approximation of W - W^ in Frobenius norm, U carrying the
// singular values and V the right singular vectors.
struct SvdPair {
  DenseMatrix u;
  DenseMatrix v;
};
SvdPair svd_baseline(const DenseMatrix& w, const DenseMatrix& w_hat, std::size_t k);

// Unconstrained-weight lower bound for any quantized solution at rank k.
InitResult oracle_relaxed(const DenseMatrix& w, const CalibStats& stats, std::size_t k);

}  // namespace lrc
