#include "lrc/hadamard.hpp"

#include <cmath>
#include <random>
#include <string>

#include "lrc/errors.hpp"
#include "lrc/linalg.hpp"

namespace lrc {
namespace {

void require_plan_dim(std::size_t dim) {
  if (!is_power_of_two(dim)) {
    fail(ErrorKind::DimNotPowerOfTwo,
         "Hadamard rotation needs a power-of-two dimension, got " + std::to_string(dim));
  }
}

// Unnormalized fast Walsh-Hadamard transform of a strided vector.
void fwht(std::vector<double>& v) {
  const std::size_t n = v.size();
  for (std::size_t h = 1; h < n; h <<= 1) {
    for (std::size_t i = 0; i < n; i += h << 1) {
      for (std::size_t j = i; j < i + h; ++j) {
        const double a = v[j];
        const double b = v[j + h];
        v[j] = a + b;
        v[j + h] = a - b;
      }
    }
  }
}

}  // namespace

bool is_power_of_two(std::size_t n) noexcept { return n > 0 && (n & (n - 1)) == 0; }

RotationPlan::RotationPlan(std::size_t dim, std::optional<std::vector<double>> signs)
    : dim_(dim), signs_(std::move(signs)) {}

RotationPlan RotationPlan::hadamard(std::size_t dim) {
  require_plan_dim(dim);
  return RotationPlan(dim, std::nullopt);
}

RotationPlan RotationPlan::randomized(std::size_t dim, std::uint64_t seed) {
  require_plan_dim(dim);
  std::mt19937_64 engine(seed);
  std::vector<double> signs(dim);
  for (double& s : signs) s = (engine() >> 63) ? -1.0 : 1.0;
  return RotationPlan(dim, std::move(signs));
}

DenseMatrix RotationPlan::matrix() const { return apply_rotation(DenseMatrix::identity(dim_), *this); }

DenseMatrix apply_rotation(const DenseMatrix& x, const RotationPlan& plan) {
  if (x.rows() != plan.dim()) {
    if (!is_power_of_two(x.rows())) require_plan_dim(x.rows());
    fail(ErrorKind::DimensionMismatch, "rotation of dim " + std::to_string(plan.dim()) +
                                           " applied to " + std::to_string(x.rows()) +
                                           " rows");
  }
  const std::size_t d = plan.dim();
  const double norm = 1.0 / std::sqrt(static_cast<double>(d));
  const auto& signs = plan.sign_diag();

  DenseMatrix out(x.rows(), x.cols());
  std::vector<double> column(d);
  for (std::size_t c = 0; c < x.cols(); ++c) {
    for (std::size_t r = 0; r < d; ++r) column[r] = signs ? (*signs)[r] * x(r, c) : x(r, c);
    fwht(column);
    for (std::size_t r = 0; r < d; ++r) out(r, c) = column[r] * norm;
  }
  return out;
}

DenseMatrix fuse_into_layer(const DenseMatrix& w, const RotationPlan& plan) {
  if (w.cols() != plan.dim()) {
    if (!is_power_of_two(w.cols())) require_plan_dim(w.cols());
    fail(ErrorKind::DimensionMismatch, "rotation of dim " + std::to_string(plan.dim()) +
                                           " fused into layer with " +
                                           std::to_string(w.cols()) + " inputs");
  }
  // W Q^T = (Q W^T)^T
  return linalg::transpose(apply_rotation(linalg::transpose(w), plan));
}

double kurtosis(const DenseMatrix& x) {
  if (x.empty()) return 0.0;
  double m2 = 0.0;
  double m4 = 0.0;
  for (double v : x.data()) {
    const double sq = v * v;
    m2 += sq;
    m4 += sq * sq;
  }
  if (m2 == 0.0) return 0.0;
  const double n = static_cast<double>(x.size());
  m2 /= n;
  m4 /= n;
  return m4 / (m2 * m2);
}

IncoherenceReport incoherence_report(const DenseMatrix& x, const DenseMatrix& x_rotated) {
  return {linalg::max_abs(x),        linalg::max_abs(x_rotated), kurtosis(x),
          kurtosis(x_rotated),       linalg::frobenius_norm(x),  linalg::frobenius_norm(x_rotated)};
}

}  // namespace lrc
