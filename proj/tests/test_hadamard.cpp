#include <doctest.h>

#include <cmath>

#include "lrc/errors.hpp"
#include "lrc/hadamard.hpp"
#include "lrc/linalg.hpp"
#include "support.hpp"

using lrc::DenseMatrix;
using lrc::RotationPlan;
using testing::fro;
using testing::naive_mul;
using testing::naive_sub;
using testing::naive_t;

namespace {

// Sylvester construction by explicit Kronecker doubling.
DenseMatrix sylvester(std::size_t d) {
  DenseMatrix h{{1.0}};
  while (h.rows() < d) {
    const std::size_t n = h.rows();
    DenseMatrix next(2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        next(i, j) = h(i, j);
        next(i, j + n) = h(i, j);
        next(i + n, j) = h(i, j);
        next(i + n, j + n) = -h(i, j);
      }
    h = next;
  }
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& v : h.data()) v *= s;
  return h;
}

lrc::ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const lrc::Error& e) {
    return e.kind();
  }
  FAIL("expected an lrc::Error");
  return lrc::ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("two-point transform") {
  const DenseMatrix y = lrc::apply_rotation(DenseMatrix{{1}, {1}}, RotationPlan::hadamard(2));
  CHECK(y(0, 0) == doctest::Approx(2.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(std::abs(y(1, 0)) <= 1e-15);
}

TEST_CASE("fast transform matches the Sylvester matrix") {
  lrc::Rng rng(51);
  for (std::size_t d : {1u, 2u, 4u, 8u, 32u}) {
    const DenseMatrix x = testing::random_matrix(rng, d, 3);
    const DenseMatrix fast = lrc::apply_rotation(x, RotationPlan::hadamard(d));
    CHECK(fro(naive_sub(fast, naive_mul(sylvester(d), x))) <= 1e-12 * (1.0 + fro(x)));
    CHECK(fro(naive_sub(RotationPlan::hadamard(d).matrix(), sylvester(d))) <= 1e-14 * d);
  }
}

TEST_CASE("normalized transform is an involution") {
  lrc::Rng rng(52);
  const DenseMatrix x = testing::random_matrix(rng, 16, 5);
  const auto plan = RotationPlan::hadamard(16);
  CHECK(fro(naive_sub(lrc::apply_rotation(lrc::apply_rotation(x, plan), plan), x)) <= 1e-10 * fro(x));
}

TEST_CASE("plans are orthogonal for every power of two up to 1024") {
  for (std::size_t d = 2; d <= 1024; d *= 2) {
    for (const auto& plan : {RotationPlan::hadamard(d), RotationPlan::randomized(d, d)}) {
      const DenseMatrix q = lrc::apply_rotation(DenseMatrix::identity(d), plan);
      DenseMatrix qtq = lrc::linalg::matmul_tn(q, q);
      for (std::size_t i = 0; i < d; ++i) qtq(i, i) -= 1.0;
      CHECK(fro(qtq) <= 1e-10);
    }
  }
}

TEST_CASE("rotation preserves energy") {
  lrc::Rng rng(53);
  const DenseMatrix x = testing::random_matrix(rng, 64, 10);
  const DenseMatrix y = lrc::apply_rotation(x, RotationPlan::randomized(64, 9));
  CHECK(std::abs(fro(y) - fro(x)) <= 1e-10 * fro(x));
  const auto rep = lrc::incoherence_report(x, y);
  CHECK(rep.energy_after == doctest::Approx(rep.energy_before).epsilon(1e-10));
}

TEST_CASE("non power of two dimensions are rejected") {
  CHECK(kind_of([] { RotationPlan::hadamard(3); }) == lrc::ErrorKind::DimNotPowerOfTwo);
  CHECK(kind_of([] { RotationPlan::randomized(12, 1); }) == lrc::ErrorKind::DimNotPowerOfTwo);
  CHECK(kind_of([] { lrc::apply_rotation(DenseMatrix(3, 1), RotationPlan::hadamard(4)); }) ==
        lrc::ErrorKind::DimNotPowerOfTwo);
  CHECK(kind_of([] { lrc::apply_rotation(DenseMatrix(8, 1), RotationPlan::hadamard(4)); }) ==
        lrc::ErrorKind::DimensionMismatch);
  CHECK(kind_of([] { lrc::fuse_into_layer(DenseMatrix(2, 3), RotationPlan::hadamard(4)); }) ==
        lrc::ErrorKind::DimNotPowerOfTwo);
  CHECK(lrc::is_power_of_two(1));
  CHECK(!lrc::is_power_of_two(0));
  CHECK(!lrc::is_power_of_two(6));
}

TEST_CASE("fusing into the identity gives the transposed rotation") {
  const auto plan = RotationPlan::randomized(8, 3);
  const DenseMatrix fused = lrc::fuse_into_layer(DenseMatrix::identity(8), plan);
  CHECK(fro(naive_sub(fused, naive_t(plan.matrix()))) <= 1e-14);
  lrc::Rng rng(54);
  const DenseMatrix x = testing::random_matrix(rng, 8, 4);
  CHECK(fro(naive_sub(naive_mul(fused, lrc::apply_rotation(x, plan)), x)) <= 1e-12 * fro(x));
}

TEST_CASE("randomized plan is H D") {
  const auto plan = RotationPlan::randomized(8, 17);
  REQUIRE(plan.sign_diag().has_value());
  const auto& signs = *plan.sign_diag();
  for (double s : signs) CHECK(std::abs(s) == 1.0);
  DenseMatrix d(8, 8);
  for (std::size_t i = 0; i < 8; ++i) d(i, i) = signs[i];
  CHECK(fro(naive_sub(plan.matrix(), naive_mul(sylvester(8), d))) <= 1e-14);

  lrc::Rng rng(55);
  const DenseMatrix w = testing::random_matrix(rng, 5, 8);
  const DenseMatrix expected = naive_mul(naive_mul(w, naive_t(d)), naive_t(sylvester(8)));
  CHECK(fro(naive_sub(lrc::fuse_into_layer(w, plan), expected)) <= 1e-13 * fro(w));
  CHECK(RotationPlan::randomized(8, 17).sign_diag() == plan.sign_diag());
  CHECK(RotationPlan::randomized(64, 1).sign_diag() != RotationPlan::randomized(64, 2).sign_diag());
}

TEST_CASE("fused layer outputs are unchanged") {
  lrc::Rng rng(56);
  for (std::size_t d : {4u, 16u, 128u}) {
    const DenseMatrix w = testing::random_matrix(rng, 6, d);
    const auto plan = RotationPlan::randomized(d, d + 1);
    const DenseMatrix fused = lrc::fuse_into_layer(w, plan);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      const DenseMatrix x = testing::random_matrix(rng, d, 1);
      const DenseMatrix ref = naive_mul(w, x);
      const DenseMatrix out = naive_mul(fused, lrc::apply_rotation(x, plan));
      worst = std::max(worst, fro(naive_sub(ref, out)) / fro(ref));
    }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("incoherence report") {
  const auto zero = lrc::incoherence_report(DenseMatrix(4, 3, 0.0), DenseMatrix(4, 3, 0.0));
  CHECK(zero.max_abs_before == 0.0);
  CHECK(zero.max_abs_after == 0.0);
  CHECK(zero.kurtosis_before == 0.0);
  CHECK(zero.kurtosis_after == 0.0);
  CHECK(zero.energy_before == 0.0);

  lrc::Rng rng(57);
  DenseMatrix x = testing::random_matrix(rng, 64, 32, 0.1);
  for (std::size_t c = 0; c < 32; ++c) x(5, c) = 50.0;
  const auto rep = lrc::incoherence_report(x, lrc::apply_rotation(x, RotationPlan::randomized(64, 4)));
  MESSAGE("max |x| " << rep.max_abs_before << " -> " << rep.max_abs_after << ", kurtosis "
                     << rep.kurtosis_before << " -> " << rep.kurtosis_after);
  CHECK(rep.max_abs_after < rep.max_abs_before);
}
