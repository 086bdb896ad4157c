#include "distclass/gaussian.hpp"

#include "distclass/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace distclass {

namespace {

constexpr double kJitterScale = 1e-10;
// Relative size under which the smallest eigenvalue counts as zero.
constexpr double kSingularTol = 1e-12;
// Fraction of tr(S1) + tr(S2) under which the aligned form is used.
constexpr double kCancellationTol = 1e-4;

struct Jittered {
  Matrix cov;
  SymEig eig;
  bool singular = false;
};

Jittered jitter_if_singular(const Matrix& s) {
  Jittered out{s, sym_eig(s), false};
  const auto d = s.rows();
  if (d == 0) {
    return out;
  }
  const double top = std::max(0.0, out.eig.eigenvalues[0]);
  const double bottom = std::max(0.0, out.eig.eigenvalues[d - 1]);
  if (bottom <= kSingularTol * top) {
    out.singular = true;
    const double jitter = kJitterScale * std::max(s.trace(), 0.0) / static_cast<double>(d);
    out.cov.diagonal().array() += jitter;
    out.eig.eigenvalues.array() += jitter;
  }
  return out;
}

Matrix sqrt_from(const SymEig& eig) {
  const Vector roots = eig.eigenvalues.cwiseMax(0.0).cwiseSqrt();
  Matrix r = eig.eigenvectors * roots.asDiagonal() * eig.eigenvectors.transpose();
  return 0.5 * (r + r.transpose());
}

// min over orthogonal Q of |R1 - R2 Q|_F^2, attained at Q = V U^T for
// R1 R2 = U S V^T.
double bures_squared_aligned(const Matrix& sqrt1, const Matrix& sqrt2) {
  const Eigen::JacobiSVD<Matrix> svd(sqrt1 * sqrt2, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return (sqrt1 - sqrt2 * svd.matrixV() * svd.matrixU().transpose()).squaredNorm();
}

// tr(S1 + S2 - 2 (R S2 R)^{1/2}) with R = S1^{1/2}.
double bures_squared(const Matrix& sqrt1, double trace1, const Matrix& s2, const Matrix& sqrt2,
                     double trace2) {
  Matrix inner = sqrt1 * s2 * sqrt1;
  inner = 0.5 * (inner + inner.transpose()).eval();
  const Vector lambda = sym_eigenvalues(inner);
  const double cross = lambda.cwiseMax(0.0).cwiseSqrt().sum();
  const double value = trace1 + trace2 - 2.0 * cross;
  if (value < kCancellationTol * (trace1 + trace2)) {
    return bures_squared_aligned(sqrt1, sqrt2);
  }
  return value;
}

void check_same_dim(std::size_t a, std::size_t b) {
  if (a != b) {
    throw InvalidArgument("bures: dimension mismatch (" + std::to_string(a) + " vs " +
                          std::to_string(b) + ")");
  }
}

}  // namespace

double bures(const Matrix& s1, const Matrix& s2) {
  check_same_dim(static_cast<std::size_t>(s1.rows()), static_cast<std::size_t>(s2.rows()));
  const Jittered j1 = jitter_if_singular(s1);
  const Jittered j2 = jitter_if_singular(s2);
  return std::sqrt(
      bures_squared(sqrt_from(j1.eig), j1.cov.trace(), j2.cov, sqrt_from(j2.eig), j2.cov.trace()));
}

PreparedGaussian::PreparedGaussian(const GaussianParams& g) : mean_(g.mean()) {
  Jittered j = jitter_if_singular(g.covariance());
  cov_ = std::move(j.cov);
  sqrt_cov_ = sqrt_from(j.eig);
  trace_ = cov_.trace();
  singular_ = j.singular;
}

double bures_wasserstein(const PreparedGaussian& reference, const PreparedGaussian& other) {
  check_same_dim(static_cast<std::size_t>(reference.mean().size()),
                 static_cast<std::size_t>(other.mean().size()));
  const double mean_part = (reference.mean() - other.mean()).squaredNorm();
  const double cov_part = bures_squared(reference.sqrt_covariance(), reference.trace(),
                                        other.covariance(), other.sqrt_covariance(),
                                        other.trace());
  return std::sqrt(mean_part + cov_part);
}

double bures_wasserstein(const GaussianParams& g1, const GaussianParams& g2) {
  check_same_dim(g1.dim(), g2.dim());
  return bures_wasserstein(PreparedGaussian(g1), PreparedGaussian(g2));
}

double bures_deviation_bound(double n, double d, double eps, double c_v, double c_sigma) {
  if (!(n > 0) || !(d > 0) || !(eps > 0) || !(c_v > 0) || !(c_sigma > 0)) {
    throw InvalidArgument("bures_deviation_bound: all arguments must be positive");
  }
  const double d2 = d * d;
  const double exponent1 = (n * eps * eps / (8.0 * d2 * d2)) / (c_v * c_sigma + 2.0 * c_v * eps / (3.0 * d2));
  const double term1 = 2.0 * d * std::exp(-exponent1);
  const double inner = std::sqrt(n) / (24.0 * std::sqrt(c_v)) * eps * eps - 1.0;
  const double term2 = inner < 0.0 ? 1.0 : std::exp(-std::sqrt(inner));
  return std::clamp(term1 + term2, 0.0, 1.0);
}

}  // namespace distclass
