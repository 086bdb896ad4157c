#include "distclass/core.hpp"

#include "distclass/error.hpp"
#include "distclass/linalg.hpp"

#include <cmath>
#include <string>

namespace distclass {

namespace {

constexpr double kWeightSumTol = 1e-9;

}  // namespace

PointSet::PointSet(Matrix points, Vector weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  if (points_.rows() == 0) {
    throw InvalidArgument("empty distribution");
  }
  if (weights_.size() != points_.rows()) {
    throw InvalidArgument("point set: " + std::to_string(weights_.size()) + " weights for " +
                          std::to_string(points_.rows()) + " points");
  }
  if (!points_.allFinite()) {
    throw InvalidArgument("point set: non-finite coordinate");
  }
  if (!weights_.allFinite() || weights_.minCoeff() < 0.0) {
    throw InvalidArgument("point set: weights must be finite and nonnegative");
  }
  if (std::abs(weights_.sum() - 1.0) > kWeightSumTol) {
    throw InvalidArgument("point set: weights do not sum to one");
  }
}

PointSet PointSet::uniform(Matrix points) {
  const auto n = points.rows();
  if (n == 0) {
    throw InvalidArgument("empty distribution");
  }
  Vector w = Vector::Constant(n, 1.0 / static_cast<double>(n));
  return PointSet(std::move(points), std::move(w));
}

bool PointSet::has_uniform_weights() const {
  const double u = 1.0 / static_cast<double>(weights_.size());
  return (weights_.array() == u).all();
}

bool operator==(const PointSet& a, const PointSet& b) {
  return a.points_.rows() == b.points_.rows() && a.points_.cols() == b.points_.cols() &&
         a.points_ == b.points_ && a.weights_ == b.weights_;
}

GaussianParams::GaussianParams(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  const auto d = mean_.size();
  if (covariance_.rows() != d || covariance_.cols() != d) {
    throw InvalidArgument("gaussian: covariance shape does not match mean");
  }
  if (!mean_.allFinite() || !covariance_.allFinite()) {
    throw InvalidArgument("gaussian: non-finite parameters");
  }
  if (d == 0) {
    return;
  }
  // sym_eig enforces the symmetry tolerance.
  const SymEig eig = sym_eig(covariance_);
  covariance_ = 0.5 * (covariance_ + covariance_.transpose()).eval();
  const double scale = std::max(1.0, std::abs(eig.eigenvalues[0]));
  const double smallest = eig.eigenvalues[d - 1];
  if (smallest < -1e-9 * scale) {
    throw InvalidArgument("gaussian: covariance is not positive semidefinite");
  }
  if (smallest < 0.0) {
    const Vector clamped = eig.eigenvalues.cwiseMax(0.0);
    Matrix rebuilt = eig.eigenvectors * clamped.asDiagonal() * eig.eigenvectors.transpose();
    covariance_ = 0.5 * (rebuilt + rebuilt.transpose());
  }
}

bool operator==(const GaussianParams& a, const GaussianParams& b) {
  return a.mean_.size() == b.mean_.size() && a.mean_ == b.mean_ &&
         a.covariance_ == b.covariance_;
}

std::size_t payload_dim(const Payload& p) {
  return std::visit([](const auto& v) { return v.dim(); }, p);
}

bool is_point_set(const Payload& p) { return std::holds_alternative<PointSet>(p); }

std::vector<int> DistributionDataset::labels() const {
  std::vector<int> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    out.push_back(item.label);
  }
  return out;
}

void DistributionDataset::validate() const {
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    if (item.label < 0 || static_cast<std::size_t>(item.label) >= codebook.size()) {
      throw InvalidArgument("item " + std::to_string(i) + ": label " +
                            std::to_string(item.label) + " outside codebook");
    }
    if (payload_dim(item.payload) != dimension) {
      throw InvalidArgument("item " + std::to_string(i) + ": dimension " +
                            std::to_string(payload_dim(item.payload)) + " != dataset dimension " +
                            std::to_string(dimension));
    }
  }
}

DistributionDataset DistributionDataset::subset(const std::vector<std::size_t>& indices) const {
  DistributionDataset out;
  out.codebook = codebook;
  out.dimension = dimension;
  out.items.reserve(indices.size());
  for (auto i : indices) {
    out.items.push_back(items.at(i));
  }
  return out;
}

PointSet empirical_from_samples(const Matrix& samples) {
  return PointSet::uniform(samples);
}

GaussianParams gaussian_fit(const Matrix& samples) {
  const auto n = samples.rows();
  if (n < 2) {
    throw InvalidArgument("insufficient samples for covariance");
  }
  const Vector mean = samples.colwise().mean().transpose();
  const Matrix centered = samples.rowwise() - mean.transpose();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  cov = 0.5 * (cov + cov.transpose()).eval();
  return GaussianParams(mean, std::move(cov));
}

GaussianParams gaussian_fit(const PointSet& ps) {
  if (ps.has_uniform_weights()) {
    return gaussian_fit(ps.points());
  }
  const Vector& w = ps.weights();
  const double denom = 1.0 - w.squaredNorm();
  if (ps.size() < 2 || denom <= 0.0) {
    throw InvalidArgument("insufficient samples for covariance");
  }
  const Vector mean = ps.points().transpose() * w;
  const Matrix centered = ps.points().rowwise() - mean.transpose();
  Matrix cov = (centered.transpose() * w.asDiagonal() * centered) / denom;
  cov = 0.5 * (cov + cov.transpose()).eval();
  return GaussianParams(mean, std::move(cov));
}

}  // namespace distclass
