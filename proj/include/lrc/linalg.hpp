#pragma once

#include <cstddef>

#include "lrc/matrix.hpp"

// Deterministic dense kernels. All loops run in a fixed sequential order so
// identical inputs produce identical output bits.
namespace lrc::linalg {

DenseMatrix transpose(const DenseMatrix& a);

// a * b
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// a * b^T
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
// a^T * b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
// m * m^T
DenseMatrix gram(const DenseMatrix& m);

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scaled(const DenseMatrix& a, double factor);
void add_in_place(DenseMatrix& acc, const DenseMatrix& b);
void add_diagonal(DenseMatrix& a, double value);

double trace(const DenseMatrix& a);
double frobenius_norm(const DenseMatrix& a);
double frobenius_norm_sq(const DenseMatrix& a);
// Tr(a^T b), the Frobenius inner product.
double inner(const DenseMatrix& a, const DenseMatrix& b);
double max_abs(const DenseMatrix& a);

// Largest |a_ij - a_ji| relative to ||a||_F (0 for the zero matrix).
double symmetry_error(const DenseMatrix& a);
void symmetrize(DenseMatrix& a);

// Throws DimensionMismatch unless a and b have identical shapes.
void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what);

LowerTriangular cholesky(const DenseMatrix& a);

enum class TriangularSide {
  Lower,             // solve L * Z = B
  UpperTransposed,   // solve L^T * Z = B
};

DenseMatrix solve_triangular(const LowerTriangular& l, const DenseMatrix& b,
                             TriangularSide side);

// (L L^T)^{-1} B via a forward then a backward substitution.
DenseMatrix cholesky_solve(const LowerTriangular& l, const DenseMatrix& b);

// L^{-1}, itself lower triangular.
LowerTriangular invert_lower(const LowerTriangular& l);

struct JacobiOptions {
  double relative_tolerance = 1e-12;
  int max_sweeps = 100;
};

// Full spectrum of a symmetric matrix by cyclic Jacobi rotations, sorted by
// descending eigenvalue. Equal eigenvalues keep their post-sweep column order,
// so eigenvectors are only unique up to rotation within an eigenspace.
EigPair symmetric_eigen(const DenseMatrix& s, const JacobiOptions& options = {});

// The k largest (signed) eigenvalues and their unit eigenvectors. s does not
// need to be positive semi-definite.
EigPair top_k_eigvecs(const DenseMatrix& s, std::size_t k,
                      const JacobiOptions& options = {});

}  // namespace lrc::linalg
