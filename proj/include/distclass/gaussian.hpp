#pragma once

#include "distclass/core.hpp"
#include "distclass/linalg.hpp"

namespace distclass {

/// Bures metric between two covariance matrices:
///   B^2 = tr(S1 + S2 - 2 (S1^{1/2} S2 S1^{1/2})^{1/2}).
/// When either input has a zero (clamped) smallest eigenvalue, each matrix
/// gets a jitter of 1e-10 * tr(S)/d on its diagonal first. Tiny negative
/// B^2 from round-off is clamped to 0.
double bures(const Matrix& s1, const Matrix& s2);

/// Closed-form 2-Wasserstein distance between Gaussians:
///   sqrt(||m1 - m2||^2 + B(S1, S2)^2).
double bures_wasserstein(const GaussianParams& g1, const GaussianParams& g2);

/// A Gaussian with its jittered covariance square root cached, for repeated
/// evaluation against many others.
class PreparedGaussian {
 public:
  explicit PreparedGaussian(const GaussianParams& g);

  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return cov_; }
  const Matrix& sqrt_covariance() const { return sqrt_cov_; }
  double trace() const { return trace_; }
  bool singular() const { return singular_; }

 private:
  Vector mean_;
  Matrix cov_;        // jittered when singular
  Matrix sqrt_cov_;
  double trace_ = 0;
  bool singular_ = false;
};

/// Same value as bures_wasserstein on the underlying parameters; the
/// square root of `reference` is reused.
double bures_wasserstein(const PreparedGaussian& reference, const PreparedGaussian& other);

/// Right-hand side of the deviation inequality for the plug-in Gaussian
/// 2-Wasserstein distance from N samples:
///   2d exp(-(N eps^2 / (8 d^4)) / (C_v C_S + 2 C_v eps / (3 d^2)))
///   + exp(-((sqrt(N) / (24 sqrt(C_v))) eps^2 - 1)^{1/2})
/// The second term is taken as 1 whenever the quantity under the square
/// root is negative. The sum is clamped to [0, 1].
double bures_deviation_bound(double n, double d, double eps, double c_v, double c_sigma);

}  // namespace distclass
