#include "distclass/linalg.hpp"

#include "distclass/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace distclass {

namespace {

constexpr int kMaxSweeps = 50;
constexpr double kSymmetryTol = 1e-9;
constexpr double kOffDiagonalTol = 1e-12;

Matrix symmetrized(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw InvalidArgument("sym_eig: matrix is not square");
  }
  if (!a.allFinite()) {
    throw InvalidArgument("sym_eig: matrix has non-finite entries");
  }
  const double scale = std::max(1.0, max_abs(a));
  if (max_abs(a - a.transpose()) > kSymmetryTol * scale) {
    throw InvalidArgument("sym_eig: matrix is not symmetric");
  }
  return 0.5 * (a + a.transpose());
}

double off_diagonal_norm(const Matrix& a) {
  const Eigen::Index n = a.rows();
  double sum = 0.0;
  for (Eigen::Index q = 1; q < n; ++q) {
    for (Eigen::Index p = 0; p < q; ++p) {
      sum += a(p, q) * a(p, q);
    }
  }
  return std::sqrt(2.0 * sum);
}

// In-place cyclic Jacobi. On return the diagonal of `a` holds the
// eigenvalues; `v` (if given) accumulates the rotations.
void jacobi(Matrix& a, Matrix* v) {
  const Eigen::Index n = a.rows();
  const double target = kOffDiagonalTol * a.norm();
  for (int sweep = 0;; ++sweep) {
    const double off = off_diagonal_norm(a);
    if (off <= target) {
      return;
    }
    if (sweep == kMaxSweeps) {
      throw NumericalError("eigensolver failed");
    }
    for (Eigen::Index q = 1; q < n; ++q) {
      for (Eigen::Index p = 0; p < q; ++p) {
        const double apq = a(p, q);
        if (apq == 0.0) {
          continue;
        }
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
          if (theta < 0.0) {
            t = -t;
          }
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        double* colp = a.col(p).data();
        double* colq = a.col(q).data();
        for (Eigen::Index k = 0; k < n; ++k) {
          if (k == p || k == q) {
            continue;
          }
          const double akp = colp[k];
          const double akq = colq[k];
          colp[k] = c * akp - s * akq;
          colq[k] = s * akp + c * akq;
        }
        // Mirror the updated columns into rows p and q.
        for (Eigen::Index k = 0; k < n; ++k) {
          if (k == p || k == q) {
            continue;
          }
          a(p, k) = colp[k];
          a(q, k) = colq[k];
        }
        if (v != nullptr) {
          double* vp = v->col(p).data();
          double* vq = v->col(q).data();
          for (Eigen::Index k = 0; k < n; ++k) {
            const double x = vp[k];
            const double y = vq[k];
            vp[k] = c * x - s * y;
            vq[k] = s * x + c * y;
          }
        }
      }
    }
  }
}

// Householder reduction to tridiagonal form. On return d holds the
// diagonal and e(k) couples k and k + 1; e(n - 1) = 0. `a` is destroyed.
void tridiagonalize(Matrix& a, Vector& d, Vector& e) {
  const Eigen::Index n = a.rows();
  e.setZero();
  for (Eigen::Index k = 0; k + 2 < n; ++k) {
    const Eigen::Index m = n - k - 1;
    Vector v = a.col(k).tail(m);
    const double norm = v.norm();
    d[k] = a(k, k);
    if (norm == 0.0) {
      continue;
    }
    const double alpha = v[0] > 0.0 ? -norm : norm;
    e[k] = alpha;
    v[0] -= alpha;
    const double vnorm = v.norm();
    if (vnorm == 0.0) {
      continue;
    }
    v /= vnorm;
    auto block = a.bottomRightCorner(m, m);
    const Vector p = block * v;
    const Vector w = p - v.dot(p) * v;
    for (Eigen::Index j = 0; j < m; ++j) {
      block.col(j) -= (2.0 * w[j]) * v + (2.0 * v[j]) * w;
    }
  }
  if (n >= 2) {
    d[n - 2] = a(n - 2, n - 2);
    e[n - 2] = a(n - 1, n - 2);
  }
  if (n >= 1) {
    d[n - 1] = a(n - 1, n - 1);
  }
}

// Implicit-shift QL on a symmetric tridiagonal matrix; eigenvalues end up
// in d (unsorted).
void tridiagonal_ql(Vector& d, Vector& e) {
  const Eigen::Index n = d.size();
  for (Eigen::Index l = 0; l < n; ++l) {
    int iter = 0;
    Eigen::Index m = l;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) + dd == dd) break;
      }
      if (m == l) {
        break;
      }
      if (++iter > 30 * static_cast<int>(n) + 60) {
        throw NumericalError("eigensolver failed");
      }
      double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
      double r = std::sqrt(g * g + 1.0);
      g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
      double s = 1.0, c = 1.0, p = 0.0;
      bool deflated = false;
      for (Eigen::Index i = m - 1; i >= l; --i) {
        const double f = s * e[i];
        const double b = c * e[i];
        r = std::sqrt(f * f + g * g);
        e[i + 1] = r;
        if (r == 0.0) {
          d[i + 1] -= p;
          e[m] = 0.0;
          deflated = true;
          break;
        }
        s = f / r;
        c = g / r;
        g = d[i + 1] - p;
        r = (d[i] - g) * s + 2.0 * c * b;
        p = s * r;
        d[i + 1] = g + p;
        g = c * r - b;
      }
      if (deflated) {
        continue;
      }
      d[l] -= p;
      e[l] = g;
      e[m] = 0.0;
    } while (m != l);
  }
}

std::vector<Eigen::Index> descending_order(const Vector& values) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    return values[i] > values[j];
  });
  return order;
}

}  // namespace

double max_abs(const Matrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

SymEig sym_eig(const Matrix& input) {
  Matrix a = symmetrized(input);
  const Eigen::Index n = a.rows();
  Matrix v = Matrix::Identity(n, n);
  jacobi(a, &v);

  const Vector diag = a.diagonal();
  const auto order = descending_order(diag);
  SymEig out{Vector(n), Matrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto src = order[static_cast<std::size_t>(k)];
    out.eigenvalues[k] = diag[src];
    out.eigenvectors.col(k) = v.col(src);
  }
  return out;
}

Vector sym_eigenvalues(const Matrix& input) {
  Matrix a = symmetrized(input);
  const Eigen::Index n = a.rows();
  Vector d(n), e(n);
  tridiagonalize(a, d, e);
  tridiagonal_ql(d, e);
  std::sort(d.begin(), d.end(), std::greater<>());
  return d;
}

Matrix spd_sqrt(const Matrix& a) {
  const SymEig eig = sym_eig(a);
  const Eigen::Index n = a.rows();
  if (n == 0) {
    return Matrix(0, 0);
  }
  const double tol = 1e-9 * std::max(1.0, std::abs(eig.eigenvalues[0]));
  Vector roots(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double lambda = eig.eigenvalues[k];
    if (lambda < -tol) {
      throw InvalidArgument("spd_sqrt: matrix is not positive semidefinite");
    }
    roots[k] = std::sqrt(std::max(lambda, 0.0));
  }
  Matrix r = eig.eigenvectors * roots.asDiagonal() * eig.eigenvectors.transpose();
  return 0.5 * (r + r.transpose());
}

}  // namespace distclass
