#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lrc/errors.hpp"
#include "lrc/linalg.hpp"
#include "lrc/lrc.hpp"
#include "support.hpp"

using lrc::CalibStats;
using lrc::DenseMatrix;
using lrc::QuantGrid;
using testing::fro;
using testing::Instance;
using testing::make_instance;
using testing::naive_mul;
using testing::naive_sub;
using testing::naive_t;

namespace {

DenseMatrix none(std::size_t rows) { return DenseMatrix(rows, 0); }

double relaxed_stats(const Instance& inst, const DenseMatrix& u, const DenseMatrix& v) {
  const DenseMatrix target = lrc::build_target_weight(
      inst.w, u, v, inst.stats.sigma_xy(), lrc::linalg::cholesky(inst.stats.sigma_y()));
  return lrc::lrc_objective(inst.w, target, u, v, inst.stats);
}

DenseMatrix projector(const DenseMatrix& u) { return naive_mul(u, naive_t(u)); }

lrc::GptqConfig gptq(int bits) { return {QuantGrid::with_bits(bits), std::nullopt, 32}; }

void check_trace(const lrc::LrcSolution& sol) {
  for (double v : sol.objective_trace) CHECK(v >= 0.0);
  for (std::size_t t = 0; t + 1 < sol.objective_trace.size(); t += 2) {
    const double q = sol.objective_trace[t];
    CHECK(sol.objective_trace[t + 1] <= q + 1e-9 * (1.0 + q));
  }
}

}  // namespace

TEST_CASE("trace-form objective equals the raw-data objective") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Instance inst = make_instance(seed, 4, 6, 30, 4, 0.0);
    lrc::Rng rng(1000 + seed);
    const DenseMatrix w_hat = testing::random_matrix(rng, 4, 6);
    const DenseMatrix u = testing::random_matrix(rng, 4, 2);
    const DenseMatrix v = testing::random_matrix(rng, 6, 2);
    const double direct = testing::direct_objective(inst.w, w_hat, u, v, inst.x, inst.y);
    CHECK(lrc::lrc_objective(inst.w, w_hat, u, v, inst.stats) ==
          doctest::Approx(direct).epsilon(1e-8));
    CHECK(lrc::lrc_objective(inst.w, w_hat, none(4), none(6), inst.stats) ==
          doctest::Approx(testing::direct_objective(inst.w, w_hat, none(4), none(6), inst.x, inst.y))
              .epsilon(1e-8));
  }
}

TEST_CASE("objective is zero for exact weights with identity activations") {
  const Instance inst = make_instance(1, 3, 5, 20, std::nullopt, 0.0);
  CHECK(lrc::lrc_objective(inst.w, inst.w, none(3), none(5), inst.stats) <=
        1e-10 * testing::fro2(naive_mul(inst.w, inst.x)));
}

TEST_CASE("damping adds a non-negative bias") {
  const Instance raw = make_instance(2, 3, 5, 20, 4, 0.0);
  const Instance damped = make_instance(2, 3, 5, 20, 4, 1e-2);
  const DenseMatrix w_hat(3, 5, 0.0);
  CHECK(lrc::lrc_objective(raw.w, w_hat, none(3), none(5), damped.stats) >
        lrc::lrc_objective(raw.w, w_hat, none(3), none(5), raw.stats));
}

TEST_CASE("objective minus weight gap is constant in the quantized weight") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Instance inst = make_instance(10 + seed, 6, 8, 64, 4, 0.0);
    lrc::Rng rng(seed);
    const DenseMatrix u = testing::random_matrix(rng, 6, 2);
    const DenseMatrix v = testing::random_matrix(rng, 8, 2);
    const DenseMatrix target = lrc::build_target_weight(
        inst.w, u, v, inst.stats.sigma_xy(), lrc::linalg::cholesky(inst.stats.sigma_y()));
    double lo = INFINITY, hi = -INFINITY;
    for (int t = 0; t < 50; ++t) {
      const DenseMatrix w_hat = testing::random_matrix(rng, 6, 8);
      const double gap = lrc::lrc_objective(inst.w, w_hat, u, v, inst.stats) -
                         lrc::quantization_objective(target, w_hat, inst.stats.sigma_y());
      lo = std::min(lo, gap);
      hi = std::max(hi, gap);
    }
    CHECK(hi - lo <= 1e-8 * std::max(std::abs(hi), std::abs(lo)));
  }
}

TEST_CASE("weight gap stays constant with damped statistics") {
  const Instance inst = make_instance(20, 5, 6, 40, 3, 1e-2);
  lrc::Rng rng(3);
  const DenseMatrix u = testing::random_matrix(rng, 5, 1);
  const DenseMatrix v = testing::random_matrix(rng, 6, 1);
  const DenseMatrix target = lrc::build_target_weight(
      inst.w, u, v, inst.stats.sigma_xy(), lrc::linalg::cholesky(inst.stats.sigma_y()));
  const DenseMatrix a = testing::random_matrix(rng, 5, 6);
  const DenseMatrix b = testing::random_matrix(rng, 5, 6);
  const double ga = lrc::lrc_objective(inst.w, a, u, v, inst.stats) -
                    lrc::quantization_objective(target, a, inst.stats.sigma_y());
  const double gb = lrc::lrc_objective(inst.w, b, u, v, inst.stats) -
                    lrc::quantization_objective(target, b, inst.stats.sigma_y());
  CHECK(ga == doctest::Approx(gb).epsilon(1e-9));
}

TEST_CASE("init with identity activations has a vanishing scatter") {
  const Instance inst = make_instance(30, 4, 6, 40, std::nullopt, 0.0);
  const auto init = lrc::init_lr(inst.w, inst.stats, 2);
  CHECK(fro(init.scatter.sigma_init) <= 1e-8 * fro(init.scatter.sigma1));
  CHECK(init.objective <= 1e-8 * testing::fro2(naive_mul(inst.w, inst.x)));
}

TEST_CASE("init at full output rank absorbs the whole residual") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Instance inst = make_instance(40 + seed, 4, 7, 50, 3, 0.0);
    const auto init = lrc::init_lr(inst.w, inst.stats, 4);
    CHECK(init.objective <= 1e-8 * testing::fro2(naive_mul(inst.w, inst.x)));
  }
}

TEST_CASE("init beats random low-rank pairs with their own optimal weight") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Instance inst = make_instance(50 + seed, 3, 4, 32, 2, 1e-2);
    const auto init = lrc::init_lr(inst.w, inst.stats, 1);
    CHECK(init.objective == doctest::Approx(relaxed_stats(inst, init.u, init.v)).epsilon(1e-10));
    lrc::Rng rng(seed);
    for (int t = 0; t < 500; ++t) {
      const DenseMatrix u = testing::random_matrix(rng, 3, 1);
      const DenseMatrix v = testing::random_matrix(rng, 4, 1);
      CHECK(init.objective <= relaxed_stats(inst, u, v) + 1e-9 * (1.0 + init.objective));
    }
  }
}

TEST_CASE("init on undamped data matches the raw-data relaxed objective") {
  const Instance inst = make_instance(55, 4, 5, 40, 3, 0.0);
  const auto init = lrc::init_lr(inst.w, inst.stats, 2);
  CHECK(init.objective == doctest::Approx(testing::relaxed_direct(inst, init.u, init.v)).epsilon(1e-7));
}

TEST_CASE("scatter matrices are symmetric and the init scatter is PSD") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Instance inst = make_instance(60 + seed, 5, 6, 40, 3, 1e-2);
    const auto init = lrc::init_lr(inst.w, inst.stats, 2);
    CHECK(lrc::linalg::symmetry_error(init.scatter.sigma1) <= 1e-9);
    CHECK(lrc::linalg::symmetry_error(init.scatter.sigma2) <= 1e-9);
    CHECK(lrc::linalg::symmetry_error(init.scatter.sigma_init) <= 1e-9);
    const auto eig = testing::oracle_eigen(init.scatter.sigma_init);
    CHECK(eig.values.back() >= -1e-8 * fro(init.scatter.sigma_init));

    const DenseMatrix w_hat = lrc::dequantize(lrc::rtn_quantize_weight(inst.w, QuantGrid::with_bits(3)));
    const auto lr = lrc::update_lr(inst.w, w_hat, inst.stats, 2);
    CHECK(lrc::linalg::symmetry_error(lr.scatter.sigma1) <= 1e-9);
    CHECK(lrc::linalg::symmetry_error(lr.scatter.sigma2) <= 1e-9);
    CHECK(lrc::linalg::symmetry_error(lr.scatter.sigma3) <= 1e-9);
  }
}

TEST_CASE("init objective is non-increasing in the rank") {
  const Instance inst = make_instance(70, 6, 8, 64, 3, 0.0);
  double prev = relaxed_stats(inst, none(6), none(8));
  for (std::size_t k = 1; k <= 6; ++k) {
    const double obj = lrc::init_lr(inst.w, inst.stats, k).objective;
    CHECK(obj <= prev + 1e-9 * (1.0 + prev));
    prev = obj;
  }
  CHECK(prev <= 1e-8 * testing::fro2(naive_mul(inst.w, inst.x)));
}

TEST_CASE("update with a zero quantized weight reduces to the plain scatter") {
  const Instance inst = make_instance(80, 4, 6, 40, 4, 1e-2);
  const auto lr = lrc::update_lr(inst.w, DenseMatrix(4, 6, 0.0), inst.stats, 2);
  const DenseMatrix sigma1 = naive_mul(naive_mul(inst.w, inst.stats.sigma_x()), naive_t(inst.w));
  CHECK(fro(lr.scatter.sigma2) == 0.0);
  CHECK(fro(lr.scatter.sigma3) == 0.0);
  const auto oracle = testing::oracle_eigen(sigma1);
  DenseMatrix top(4, 2);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 2; ++c) top(r, c) = oracle.vectors(r, c);
  CHECK(fro(naive_sub(projector(lr.u), projector(top))) <= 1e-8);
  CHECK(fro(naive_sub(lr.v, naive_mul(naive_t(inst.w), lr.u))) <= 1e-10 * fro(lr.v));
}

TEST_CASE("update is the best low-rank pair for a fixed quantized weight") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Instance inst = make_instance(90 + seed, 3, 4, 32, 3, 1e-2);
    const DenseMatrix w_hat = lrc::dequantize(lrc::rtn_quantize_weight(inst.w, QuantGrid::with_bits(2)));
    const auto lr = lrc::update_lr(inst.w, w_hat, inst.stats, 1);
    const double best = lrc::lrc_objective(inst.w, w_hat, lr.u, lr.v, inst.stats);
    CHECK(best <= lrc::lrc_objective(inst.w, w_hat, none(3), none(4), inst.stats));
    CHECK(fro(naive_sub(naive_mul(naive_t(lr.u), lr.u), DenseMatrix::identity(1))) <= 1e-9);
    lrc::Rng rng(seed);
    for (int t = 0; t < 500; ++t) {
      const DenseMatrix u = testing::orthonormalize(testing::random_matrix(rng, 3, 1));
      const DenseMatrix v = testing::random_matrix(rng, 4, 1, 2.0);
      CHECK(best <= lrc::lrc_objective(inst.w, w_hat, u, v, inst.stats) + 1e-9 * (1.0 + best));
    }
  }
}

TEST_CASE("update beats gradient descent restarts") {
  // The returned (U, V) must be at least as good as any local search.
  const Instance inst = make_instance(95, 3, 4, 32, 3, 1e-2);
  const DenseMatrix w_hat = lrc::dequantize(lrc::rtn_quantize_weight(inst.w, QuantGrid::with_bits(2)));
  const auto lr = lrc::update_lr(inst.w, w_hat, inst.stats, 1);
  const double best = lrc::lrc_objective(inst.w, w_hat, lr.u, lr.v, inst.stats);

  const DenseMatrix& sx = inst.stats.sigma_x();
  const DenseMatrix cross = naive_mul(w_hat, naive_t(inst.stats.sigma_xy()));  // W^ Sxy^T
  const double lipschitz = testing::oracle_eigen(sx).values.front();
  lrc::Rng rng(7);
  double gd_best = INFINITY;
  for (int restart = 0; restart < 50; ++restart) {
    DenseMatrix u = testing::random_matrix(rng, 3, 1);
    DenseMatrix v = testing::random_matrix(rng, 4, 1);
    for (int it = 0; it < 2000; ++it) {
      // G = dL/dA = 2 (A Sx - W^ Sxy^T), A = W - u v^T
      const DenseMatrix a = naive_sub(inst.w, naive_mul(u, naive_t(v)));
      const DenseMatrix g = naive_sub(naive_mul(a, sx), cross);
      const DenseMatrix gu = naive_mul(g, v);
      const DenseMatrix gv = naive_mul(naive_t(g), u);
      const double step = 0.2 / (lipschitz * (1.0 + testing::fro2(u) + testing::fro2(v)));
      for (std::size_t i = 0; i < u.size(); ++i) u.data()[i] += 2.0 * step * gu.data()[i];
      for (std::size_t i = 0; i < v.size(); ++i) v.data()[i] += 2.0 * step * gv.data()[i];
    }
    gd_best = std::min(gd_best, lrc::lrc_objective(inst.w, w_hat, u, v, inst.stats));
  }
  MESSAGE("update_lr " << best << " vs gradient descent " << gd_best);
  CHECK(best <= gd_best + 1e-6);
  CHECK(gd_best <= best * (1 + 1e-3) + 1e-6);  // the search actually got close
}

TEST_CASE("update V is stationary") {
  const Instance inst = make_instance(96, 4, 5, 40, 3, 1e-2);
  const DenseMatrix w_hat = lrc::dequantize(lrc::rtn_quantize_weight(inst.w, QuantGrid::with_bits(3)));
  const auto lr = lrc::update_lr(inst.w, w_hat, inst.stats, 2);
  auto grad_norm = [&](const DenseMatrix& v) {
    const double h = 1e-5;
    double sq = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      DenseMatrix plus = v, minus = v;
      plus.data()[i] += h;
      minus.data()[i] -= h;
      const double d = (lrc::lrc_objective(inst.w, w_hat, lr.u, plus, inst.stats) -
                        lrc::lrc_objective(inst.w, w_hat, lr.u, minus, inst.stats)) /
                       (2 * h);
      sq += d * d;
    }
    return std::sqrt(sq);
  };
  lrc::Rng rng(8);
  const double at_random = grad_norm(testing::random_matrix(rng, 5, 2));
  CHECK(grad_norm(lr.v) <= 1e-5 * (1.0 + at_random));
}

TEST_CASE("init beats the SVD baseline under the relaxed objective") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Instance inst = make_instance(200 + seed, 4, 6, 24, 3, 1e-2);
    const DenseMatrix w_hat = lrc::dequantize(lrc::rtn_quantize_weight(inst.w, QuantGrid::with_bits(3)));
    const auto svd = lrc::svd_baseline(inst.w, w_hat, 2);
    const double init = lrc::init_lr(inst.w, inst.stats, 2).objective;
    CHECK(init <= relaxed_stats(inst, svd.u, svd.v) + 1e-9 * (1.0 + init));
  }
}

TEST_CASE("svd baseline") {
  lrc::Rng rng(9);
  const DenseMatrix w = testing::random_matrix(rng, 5, 6);
  const auto same = lrc::svd_baseline(w, w, 2);
  CHECK(fro(same.u) == 0.0);
  CHECK(fro(same.v) == 0.0);

  const DenseMatrix a = testing::random_matrix(rng, 5, 1);
  const DenseMatrix b = testing::random_matrix(rng, 6, 1);
  const DenseMatrix rank1 = naive_mul(a, naive_t(b));
  const auto r1 = lrc::svd_baseline(naive_sub(w, naive_sub(w, rank1)), DenseMatrix(5, 6, 0.0), 1);
  CHECK(fro(naive_sub(naive_mul(r1.u, naive_t(r1.v)), rank1)) <= 1e-9 * fro(rank1));

  for (int rep = 0; rep < 10; ++rep) {
    const DenseMatrix e = testing::random_matrix(rng, 5, 6);
    const auto s = lrc::svd_baseline(e, DenseMatrix(5, 6, 0.0), 2);
    const auto eig = testing::oracle_eigen(naive_mul(e, naive_t(e)));
    double tail = 0.0;
    for (std::size_t i = 2; i < eig.values.size(); ++i) tail += eig.values[i];
    CHECK(testing::fro2(naive_sub(e, naive_mul(s.u, naive_t(s.v)))) ==
          doctest::Approx(tail).epsilon(1e-8));
  }
  CHECK_THROWS_AS(lrc::svd_baseline(w, w, 6), lrc::Error);
}

TEST_CASE("oracle equals init and bounds every quantized solution") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Instance inst = make_instance(300 + seed, 6, 8, 48, 4, 1e-2);
    const auto oracle = lrc::oracle_relaxed(inst.w, inst.stats, 2);
    CHECK(oracle.objective == lrc::init_lr(inst.w, inst.stats, 2).objective);
    const auto sol = lrc::lrc_quantize_layer(inst.w, inst.stats, {2, 3, gptq(4)});
    const double final_obj = lrc::lrc_objective(inst.w, lrc::dequantize(sol.weight), sol.u, sol.v, inst.stats);
    CHECK(oracle.objective <= final_obj + 1e-9 * (1.0 + final_obj));
  }
  const Instance id = make_instance(310, 3, 4, 20, std::nullopt, 0.0);
  CHECK(lrc::oracle_relaxed(id.w, id.stats, 1).objective <= 1e-8 * testing::fro2(naive_mul(id.w, id.x)));
}

TEST_CASE("alternating loop: low-rank half-steps never increase the objective") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance inst = make_instance(400 + seed, 6, 8, 48, 4, 1e-2);
    for (std::size_t iterations : {1u, 5u}) {
      const auto sol = lrc::lrc_quantize_layer(inst.w, inst.stats, {2, iterations, gptq(3)});
      REQUIRE(sol.objective_trace.size() == 2 * iterations);
      CHECK(sol.iterations == iterations);
      check_trace(sol);
      CHECK(fro(naive_sub(naive_mul(naive_t(sol.u), sol.u), DenseMatrix::identity(2))) <= 1e-9);
      const DenseMatrix w_hat = lrc::dequantize(sol.weight);
      CHECK(sol.objective_trace.back() ==
            doctest::Approx(lrc::lrc_objective(inst.w, w_hat, sol.u, sol.v, inst.stats)).epsilon(1e-12));
      CHECK(sol.objective_trace.back() <=
            lrc::lrc_objective(inst.w, w_hat, none(6), none(8), inst.stats));
    }
  }
}

TEST_CASE("alternating loop with identity quantizers at full rank is lossless") {
  const Instance inst = make_instance(500, 4, 6, 40, std::nullopt, 0.0);
  lrc::GptqConfig identity{QuantGrid::identity(), std::nullopt, 32};
  const auto sol = lrc::lrc_quantize_layer(inst.w, inst.stats, {4, 2, identity});
  check_trace(sol);
  CHECK(sol.objective_trace.back() <= 1e-8 * testing::fro2(naive_mul(inst.w, inst.x)));
}

TEST_CASE("alternating loop without correction is a plain weight solve") {
  const Instance inst = make_instance(510, 4, 6, 40, 4, 1e-2);
  const auto sol = lrc::lrc_quantize_layer(inst.w, inst.stats, {0, 1, gptq(4)});
  CHECK(sol.u.cols() == 0);
  CHECK(sol.objective_trace.size() == 2);
  CHECK(sol.objective_trace[0] == sol.objective_trace[1]);
}

TEST_CASE("lrc argument errors") {
  const Instance inst = make_instance(520, 3, 4, 20, 4, 1e-2);
  auto kind = [](auto&& fn) {
    try {
      fn();
    } catch (const lrc::Error& e) {
      return e.kind();
    }
    return lrc::ErrorKind::InvalidArgument;
  };
  CHECK(kind([&] { lrc::lrc_quantize_layer(inst.w, inst.stats, {1, 0, gptq(4)}); }) ==
        lrc::ErrorKind::BadIterationCount);
  CHECK(kind([&] { lrc::init_lr(inst.w, inst.stats, 0); }) == lrc::ErrorKind::RankOutOfBounds);
  CHECK(kind([&] { lrc::init_lr(inst.w, inst.stats, 4); }) == lrc::ErrorKind::RankOutOfBounds);
  CHECK(kind([&] { lrc::update_lr(inst.w, inst.w, inst.stats, 4); }) == lrc::ErrorKind::RankOutOfBounds);
  CalibStats open(4);
  open.accumulate(inst.x, lrc::ActQuantConfig{});
  CHECK(kind([&] { lrc::init_lr(inst.w, open, 1); }) == lrc::ErrorKind::NotFinalized);
  CHECK(kind([&] { lrc::init_lr(DenseMatrix(3, 5), inst.stats, 1); }) == lrc::ErrorKind::DimensionMismatch);
}
