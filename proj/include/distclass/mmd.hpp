#pragma once

#include "distclass/core.hpp"

#include <span>

namespace distclass {

/// Gaussian RBF kernel k(x, x') = exp(-||x - x'||^2 / (2 sigma_k^2)).
struct KernelConfig {
  enum class BandwidthRule { fixed, median };

  double bandwidth = 1.0;
  BandwidthRule rule = BandwidthRule::fixed;

  void validate() const;
};

enum class MmdEstimator { biased, unbiased };

/// K_ij = k(a_i, b_j) for the given bandwidth.
Matrix gram(const PointSet& a, const PointSet& b, double bandwidth);
Matrix gram(const PointSet& a, const PointSet& b, const KernelConfig& k);

/// Squared MMD. The biased (V-statistic) form respects the point weights
/// and is clamped at 0. The unbiased form drops the diagonals of the
/// within-set Gram matrices and requires uniform weights and >= 2 points per
/// set.
double mmd2(const PointSet& a, const PointSet& b, double bandwidth,
            MmdEstimator estimator = MmdEstimator::biased);

/// With rule == median, the bandwidth is the median heuristic of a and b
/// pooled.
double mmd2(const PointSet& a, const PointSet& b, const KernelConfig& k,
            MmdEstimator estimator = MmdEstimator::biased);

/// Median of all pairwise Euclidean distances among the pooled points of
/// `sets` (lower median for an even count). Points are pooled in order; when
/// there are more than `max_points`, an evenly strided subset is used.
double median_heuristic(std::span<const PointSet* const> sets, std::size_t max_points = 2000);

/// exp(-eps^2 floor(N/2) / (8 K^2)), clamped to [0, 1].
double mmd_deviation_bound(double n, double k_bound, double eps);

/// Closed-form approximation of MMD^2 between N(m1, sigma^2 I) and
/// N(m2, sigma^2 I) under a Gaussian kernel of bandwidth sigma_k:
///   ||m1 - m2||^2 / (sigma_k^2 (1 + 2 sigma^2 / sigma_k^2)^{d/2 + 1}).
double mmd2_gaussian_approx(const Vector& m1, const Vector& m2, double sigma, double sigma_k,
                            double d);

/// Weighted mean of a Gram matrix, a^T K b. Squared distances come from the
/// expansion ||x||^2 + ||y||^2 - 2 x.y, so entries can differ from gram()
/// in the last bits. Exposed for cached evaluation.
double weighted_gram_mean(const PointSet& a, const PointSet& b, double bandwidth);

}  // namespace distclass
