#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

namespace distclass {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Empirical distribution: n support points in R^d (one per row) with
/// nonnegative weights summing to one.
class PointSet {
 public:
  /// Validates the invariants; throws InvalidArgument on violation.
  PointSet(Matrix points, Vector weights);

  /// Uniform weights 1/n.
  static PointSet uniform(Matrix points);

  const Matrix& points() const { return points_; }
  const Vector& weights() const { return weights_; }
  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(points_.cols()); }

  /// True when every weight is bit-identical to 1.0/n.
  bool has_uniform_weights() const;

  friend bool operator==(const PointSet& a, const PointSet& b);

 private:
  Matrix points_;
  Vector weights_;
};

/// Mean and covariance of a Gaussian. The covariance is symmetrized and its
/// small negative eigenvalues (>= -1e-9 relative) are clamped to zero at
/// construction.
class GaussianParams {
 public:
  GaussianParams(Vector mean, Matrix covariance);

  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return covariance_; }
  std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }

  friend bool operator==(const GaussianParams& a, const GaussianParams& b);

 private:
  Vector mean_;
  Matrix covariance_;
};

using Payload = std::variant<PointSet, GaussianParams>;

struct LabeledDistribution {
  Payload payload;
  int label = 0;

  friend bool operator==(const LabeledDistribution&, const LabeledDistribution&) = default;
};

std::size_t payload_dim(const Payload& p);
bool is_point_set(const Payload& p);

/// A labeled collection of distributions sharing one ambient dimension.
/// Labels are dense indices into `codebook`.
struct DistributionDataset {
  std::vector<LabeledDistribution> items;
  std::vector<std::string> codebook;
  std::size_t dimension = 0;

  std::size_t size() const { return items.size(); }
  std::size_t num_classes() const { return codebook.size(); }
  std::vector<int> labels() const;

  /// Checks label range and dimension consistency; throws InvalidArgument.
  void validate() const;

  /// Items at `indices`, in that order, sharing this codebook.
  DistributionDataset subset(const std::vector<std::size_t>& indices) const;

  friend bool operator==(const DistributionDataset&, const DistributionDataset&) = default;
};

/// Uniform-weight empirical distribution of the rows of `samples`.
PointSet empirical_from_samples(const Matrix& samples);

/// Plug-in Gaussian: sample mean and sample covariance (divisor n-1).
GaussianParams gaussian_fit(const Matrix& samples);

/// Weighted plug-in Gaussian of a point set. For uniform weights this equals
/// gaussian_fit(points); otherwise the covariance uses reliability weights,
/// divisor 1 - sum(w^2).
GaussianParams gaussian_fit(const PointSet& ps);

}  // namespace distclass
