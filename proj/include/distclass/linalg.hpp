#pragma once

#include "distclass/core.hpp"

namespace distclass {

/// Eigen-decomposition of a symmetric matrix: eigenvalues sorted descending,
/// matching eigenvectors stored as columns.
struct SymEig {
  Vector eigenvalues;
  Matrix eigenvectors;
};

/// Cyclic Jacobi eigensolver for symmetric matrices. The input is
/// symmetrized first and must be symmetric within 1e-9 (relative to its
/// largest entry). Sweeps until the off-diagonal Frobenius mass is at most
/// 1e-12 * ||A||_F; more than 50 sweeps raises NumericalError.
SymEig sym_eig(const Matrix& a);

/// Eigenvalues only, sorted descending. Uses Householder tridiagonal
/// reduction and implicit-shift QL, which is much cheaper than Jacobi when
/// no eigenvectors are needed.
Vector sym_eigenvalues(const Matrix& a);

/// Principal square root of a symmetric positive semidefinite matrix.
/// Eigenvalues in [-1e-9 * scale, 0) are clamped to zero; anything more
/// negative is rejected.
Matrix spd_sqrt(const Matrix& a);

/// max_ij |a_ij|
double max_abs(const Matrix& a);

}  // namespace distclass
