#pragma once

// Test-side helpers and reference oracles. Everything here is written
// independently of the library kernels (plain loops, Gauss-Jordan, classical
// Jacobi) so that it can serve as a cross-check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lrc/calib.hpp"
#include "lrc/matrix.hpp"
#include "lrc/quant.hpp"
#include "lrc/random.hpp"

namespace testing {

using lrc::DenseMatrix;

inline DenseMatrix random_matrix(lrc::Rng& rng, std::size_t r, std::size_t c, double sd = 1.0) {
  DenseMatrix m(r, c);
  for (double& v : m.data()) v = sd * rng.normal();
  return m;
}

inline DenseMatrix naive_mul(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double s = 0.0L;
      for (std::size_t p = 0; p < a.cols(); ++p) s += (long double)a(i, p) * b(p, j);
      out(i, j) = static_cast<double>(s);
    }
  return out;
}

inline DenseMatrix naive_t(const DenseMatrix& a) {
  DenseMatrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

inline DenseMatrix naive_sub(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
  return out;
}

inline double fro2(const DenseMatrix& a) {
  long double s = 0.0L;
  for (double v : a.data()) s += (long double)v * v;
  return static_cast<double>(s);
}

inline double fro(const DenseMatrix& a) { return std::sqrt(fro2(a)); }

inline DenseMatrix random_spd(lrc::Rng& rng, std::size_t d, double ridge = 1e-1) {
  const DenseMatrix m = random_matrix(rng, d, d + 3);
  DenseMatrix s = naive_mul(m, naive_t(m));
  for (std::size_t i = 0; i < d; ++i) s(i, i) += ridge;
  return s;
}

inline DenseMatrix random_symmetric(lrc::Rng& rng, std::size_t d) {
  DenseMatrix s(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) s(i, j) = s(j, i) = rng.normal();
  return s;
}

// Gauss-Jordan inverse with partial pivoting.
inline DenseMatrix gauss_jordan_inverse(DenseMatrix a) {
  const std::size_t n = a.rows();
  DenseMatrix inv = DenseMatrix::identity(n);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a(r, c)) > std::abs(a(p, c))) p = r;
    for (std::size_t j = 0; j < n; ++j) {
      std::swap(a(c, j), a(p, j));
      std::swap(inv(c, j), inv(p, j));
    }
    const double piv = a(c, c);
    for (std::size_t j = 0; j < n; ++j) {
      a(c, j) /= piv;
      inv(c, j) /= piv;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a(r, c);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        a(r, j) -= f * a(c, j);
        inv(r, j) -= f * inv(c, j);
      }
    }
  }
  return inv;
}

struct OracleEig {
  std::vector<double> values;  // descending
  DenseMatrix vectors;         // columns
};

// Classical Jacobi: rotate away the largest off-diagonal entry until the
// off-diagonal mass is negligible.
inline OracleEig oracle_eigen(DenseMatrix a) {
  const std::size_t n = a.rows();
  DenseMatrix v = DenseMatrix::identity(n);
  const double scale = std::max(fro(a), 1e-300);
  for (int iter = 0; iter < 200000; ++iter) {
    std::size_t p = 0, q = 1;
    double big = 0.0, off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        off += a(i, j) * a(i, j);
        if (std::abs(a(i, j)) > big) {
          big = std::abs(a(i, j));
          p = i;
          q = j;
        }
      }
    if (n < 2 || std::sqrt(off) <= 1e-15 * scale) break;
    const double theta = 0.5 * std::atan2(2.0 * a(p, q), a(q, q) - a(p, p));
    const double c = std::cos(theta), s = std::sin(theta);
    for (std::size_t k = 0; k < n; ++k) {
      const double akp = a(k, p), akq = a(k, q);
      a(k, p) = c * akp - s * akq;
      a(k, q) = s * akp + c * akq;
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double apk = a(p, k), aqk = a(q, k);
      a(p, k) = c * apk - s * aqk;
      a(q, k) = s * apk + c * aqk;
    }
    for (std::size_t k = 0; k < n; ++k) {
      const double vkp = v(k, p), vkq = v(k, q);
      v(k, p) = c * vkp - s * vkq;
      v(k, q) = s * vkp + c * vkq;
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) > a(y, y); });
  OracleEig out{{}, DenseMatrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values.push_back(a(order[c], order[c]));
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  return out;
}

// Gram-Schmidt on the columns.
inline DenseMatrix orthonormalize(DenseMatrix m) {
  for (std::size_t c = 0; c < m.cols(); ++c) {
    for (std::size_t p = 0; p < c; ++p) {
      double dot = 0.0;
      for (std::size_t r = 0; r < m.rows(); ++r) dot += m(r, c) * m(r, p);
      for (std::size_t r = 0; r < m.rows(); ++r) m(r, c) -= dot * m(r, p);
    }
    double nrm = 0.0;
    for (std::size_t r = 0; r < m.rows(); ++r) nrm += m(r, c) * m(r, c);
    nrm = std::sqrt(nrm);
    for (std::size_t r = 0; r < m.rows(); ++r) m(r, c) /= nrm;
  }
  return m;
}

// ||W X - W^ Y - U V^T X||_F^2 on raw data.
inline double direct_objective(const DenseMatrix& w, const DenseMatrix& w_hat,
                               const DenseMatrix& u, const DenseMatrix& v,
                               const DenseMatrix& x, const DenseMatrix& y) {
  DenseMatrix r = naive_sub(naive_mul(w, x), naive_mul(w_hat, y));
  if (u.cols() > 0) r = naive_sub(r, naive_mul(u, naive_mul(naive_t(v), x)));
  return fro2(r);
}

// A calibration instance kept in raw form next to its statistics.
struct Instance {
  DenseMatrix w;
  DenseMatrix x;
  DenseMatrix y;
  lrc::CalibStats stats;
};

inline Instance make_instance(std::uint64_t seed, std::size_t d_out, std::size_t d_in,
                              std::size_t n, std::optional<int> act_bits, double damping) {
  lrc::Rng rng(seed);
  Instance inst{random_matrix(rng, d_out, d_in), random_matrix(rng, d_in, n), {}, lrc::CalibStats(d_in)};
  const lrc::ActQuantConfig act{act_bits, 1.0, std::nullopt};
  inst.y = lrc::rtn_quantize_activations(inst.x, act);
  inst.stats.accumulate(inst.x, act);
  inst.stats.finalize(damping);
  return inst;
}

// Relaxed objective of (U, V) with its own optimal weight, all from raw data
// and a Gauss-Jordan inverse of Y Y^T.
inline double relaxed_direct(const Instance& inst, const DenseMatrix& u, const DenseMatrix& v) {
  DenseMatrix a = inst.w;
  if (u.cols() > 0) a = naive_sub(a, naive_mul(u, naive_t(v)));
  const DenseMatrix target = naive_mul(
      naive_mul(a, naive_mul(inst.x, naive_t(inst.y))),
      gauss_jordan_inverse(naive_mul(inst.y, naive_t(inst.y))));
  return direct_objective(inst.w, target, u, v, inst.x, inst.y);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("lrc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
