#include "lrc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lrc/errors.hpp"

namespace lrc::linalg {
namespace {

constexpr double kSymmetryTolerance = 1e-9;

std::string shape(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

[[noreturn]] void mismatch(const char* what, const DenseMatrix& a, const DenseMatrix& b) {
  fail(ErrorKind::DimensionMismatch,
       std::string(what) + ": incompatible shapes " + shape(a) + " and " + shape(b));
}

void require_symmetric(const DenseMatrix& s, const char* what) {
  if (!s.is_square()) {
    fail(ErrorKind::DimensionMismatch, std::string(what) + ": matrix is not square (" +
                                           shape(s) + ")");
  }
  if (symmetry_error(s) > kSymmetryTolerance) {
    fail(ErrorKind::NotSymmetric, std::string(what) + ": matrix is not symmetric");
  }
}

}  // namespace

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) mismatch("matmul", a, b);
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) mismatch("matmul_nt", a, b);
  DenseMatrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      auto brow = b.row(j);
      double sum = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) sum += arow[k] * brow[k];
      c(i, j) = sum;
    }
  }
  return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) mismatch("matmul_tn", a, b);
  DenseMatrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    auto arow = a.row(k);
    auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      if (aki == 0.0) continue;
      auto out = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aki * brow[j];
    }
  }
  return c;
}

DenseMatrix gram(const DenseMatrix& m) {
  DenseMatrix g(m.rows(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto ri = m.row(i);
    for (std::size_t j = 0; j <= i; ++j) {
      auto rj = m.row(j);
      double sum = 0.0;
      for (std::size_t k = 0; k < m.cols(); ++k) sum += ri[k] * rj[k];
      g(i, j) = sum;
      g(j, i) = sum;
    }
  }
  return g;
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) mismatch(what, a, b);
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix c = a;
  add_in_place(c, b);
  return c;
}

DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "subtract");
  DenseMatrix c = a;
  auto out = c.data();
  auto in = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= in[i];
  return c;
}

DenseMatrix scaled(const DenseMatrix& a, double factor) {
  DenseMatrix c = a;
  for (double& v : c.data()) v *= factor;
  return c;
}

void add_in_place(DenseMatrix& acc, const DenseMatrix& b) {
  require_same_shape(acc, b, "add");
  auto out = acc.data();
  auto in = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += in[i];
}

void add_diagonal(DenseMatrix& a, double value) {
  const std::size_t n = std::min(a.rows(), a.cols());
  for (std::size_t i = 0; i < n; ++i) a(i, i) += value;
}

double trace(const DenseMatrix& a) {
  double t = 0.0;
  const std::size_t n = std::min(a.rows(), a.cols());
  for (std::size_t i = 0; i < n; ++i) t += a(i, i);
  return t;
}

double frobenius_norm_sq(const DenseMatrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return s;
}

double frobenius_norm(const DenseMatrix& a) { return std::sqrt(frobenius_norm_sq(a)); }

double inner(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "inner");
  double s = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double max_abs(const DenseMatrix& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double symmetry_error(const DenseMatrix& a) {
  if (!a.is_square()) return INFINITY;
  const double norm = frobenius_norm(a);
  if (norm == 0.0) return 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j) worst = std::max(worst, std::abs(a(i, j) - a(j, i)));
  return worst / norm;
}

void symmetrize(DenseMatrix& a) {
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = v;
      a(j, i) = v;
    }
  }
}

LowerTriangular cholesky(const DenseMatrix& a) {
  require_symmetric(a, "cholesky");
  const std::size_t n = a.rows();
  LowerTriangular l(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = a(i, j);
      for (std::size_t k = 0; k < j; ++k) sum -= l(i, k) * l(j, k);
      if (i == j) {
        if (!(sum > 0.0)) throw NotPositiveDefinite(i);
        l(i, i) = std::sqrt(sum);
      } else {
        l(i, j) = sum / l(j, j);
      }
    }
  }
  return l;
}

DenseMatrix solve_triangular(const LowerTriangular& l, const DenseMatrix& b,
                             TriangularSide side) {
  const std::size_t n = l.dim();
  if (b.rows() != n) {
    fail(ErrorKind::DimensionMismatch, "solve_triangular: factor dim " + std::to_string(n) +
                                           " vs right-hand side " + shape(b));
  }
  DenseMatrix z = b;
  const std::size_t m = b.cols();
  if (side == TriangularSide::Lower) {
    for (std::size_t i = 0; i < n; ++i) {
      auto zi = z.row(i);
      for (std::size_t k = 0; k < i; ++k) {
        const double lik = l(i, k);
        if (lik == 0.0) continue;
        auto zk = z.row(k);
        for (std::size_t j = 0; j < m; ++j) zi[j] -= lik * zk[j];
      }
      const double inv = 1.0 / l(i, i);
      for (std::size_t j = 0; j < m; ++j) zi[j] *= inv;
    }
  } else {
    for (std::size_t ii = n; ii-- > 0;) {
      auto zi = z.row(ii);
      for (std::size_t k = ii + 1; k < n; ++k) {
        const double lki = l(k, ii);
        if (lki == 0.0) continue;
        auto zk = z.row(k);
        for (std::size_t j = 0; j < m; ++j) zi[j] -= lki * zk[j];
      }
      const double inv = 1.0 / l(ii, ii);
      for (std::size_t j = 0; j < m; ++j) zi[j] *= inv;
    }
  }
  return z;
}

DenseMatrix cholesky_solve(const LowerTriangular& l, const DenseMatrix& b) {
  return solve_triangular(l, solve_triangular(l, b, TriangularSide::Lower),
                          TriangularSide::UpperTransposed);
}

LowerTriangular invert_lower(const LowerTriangular& l) {
  const std::size_t n = l.dim();
  const DenseMatrix dense =
      solve_triangular(l, DenseMatrix::identity(n), TriangularSide::Lower);
  LowerTriangular inv(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) inv(i, j) = dense(i, j);
  return inv;
}

EigPair symmetric_eigen(const DenseMatrix& s, const JacobiOptions& options) {
  require_symmetric(s, "symmetric_eigen");
  const std::size_t n = s.rows();
  DenseMatrix a = s;
  symmetrize(a);
  DenseMatrix v = DenseMatrix::identity(n);

  const double threshold = options.relative_tolerance * frobenius_norm(a);
  auto off_norm = [&] {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) off += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(off);
  };

  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    if (off_norm() <= threshold) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        if (theta < 0.0) t = -t;
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;

        for (std::size_t r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a(r, p);
          const double arq = a(r, q);
          const double np = c * arp - sn * arq;
          const double nq = sn * arp + c * arq;
          a(r, p) = np;
          a(p, r) = np;
          a(r, q) = nq;
          a(q, r) = nq;
        }
        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;

        for (std::size_t r = 0; r < n; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = c * vrp - sn * vrq;
          v(r, q) = sn * vrp + c * vrq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  EigPair out{DenseMatrix(n, n), std::vector<double>(n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  return out;
}

EigPair top_k_eigvecs(const DenseMatrix& s, std::size_t k, const JacobiOptions& options) {
  require_symmetric(s, "top_k_eigvecs");
  if (k < 1 || k > s.rows()) {
    fail(ErrorKind::RankOutOfBounds, "top_k_eigvecs: k=" + std::to_string(k) +
                                         " outside [1, " + std::to_string(s.rows()) + "]");
  }
  EigPair full = symmetric_eigen(s, options);
  EigPair out{DenseMatrix(s.rows(), k), std::vector<double>(full.values.begin(),
                                                            full.values.begin() + k)};
  for (std::size_t r = 0; r < s.rows(); ++r)
    for (std::size_t c = 0; c < k; ++c) out.vectors(r, c) = full.vectors(r, c);
  return out;
}

}  // namespace lrc::linalg
