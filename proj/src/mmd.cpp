#include "distclass/mmd.hpp"

#include "distclass/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace distclass {

namespace {

void check_bandwidth(double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw InvalidArgument("kernel bandwidth must be positive");
  }
}

void check_dims(const PointSet& a, const PointSet& b) {
  if (a.dim() != b.dim()) {
    throw InvalidArgument("mmd: dimension mismatch (" + std::to_string(a.dim()) + " vs " +
                          std::to_string(b.dim()) + ")");
  }
}

double resolve_bandwidth(const PointSet& a, const PointSet& b, const KernelConfig& k) {
  k.validate();
  if (k.rule == KernelConfig::BandwidthRule::fixed) {
    return k.bandwidth;
  }
  const PointSet* sets[] = {&a, &b};
  return median_heuristic(sets);
}

}  // namespace

void KernelConfig::validate() const {
  if (rule == BandwidthRule::fixed) {
    check_bandwidth(bandwidth);
  }
}

Matrix gram(const PointSet& a, const PointSet& b, double bandwidth) {
  check_dims(a, b);
  check_bandwidth(bandwidth);
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  const Matrix& x = a.points();
  const Matrix& y = b.points();
  Matrix k(x.rows(), y.rows());
  for (Eigen::Index j = 0; j < y.rows(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      k(i, j) = std::exp(scale * (x.row(i) - y.row(j)).squaredNorm());
    }
  }
  return k;
}

Matrix gram(const PointSet& a, const PointSet& b, const KernelConfig& k) {
  return gram(a, b, resolve_bandwidth(a, b, k));
}

double weighted_gram_mean(const PointSet& a, const PointSet& b, double bandwidth) {
  check_dims(a, b);
  check_bandwidth(bandwidth);
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  const Matrix& x = a.points();
  const Matrix& y = b.points();
  const Vector ynorm = y.rowwise().squaredNorm();
  // Row blocks keep the temporary Gram slice small for large sets.
  constexpr Eigen::Index kBlock = 512;
  double total = 0.0;
  for (Eigen::Index r0 = 0; r0 < x.rows(); r0 += kBlock) {
    const Eigen::Index rows = std::min(kBlock, x.rows() - r0);
    const auto xb = x.middleRows(r0, rows);
    Matrix sq = -2.0 * xb * y.transpose();
    sq.colwise() += xb.rowwise().squaredNorm();
    sq.rowwise() += ynorm.transpose();
    const Matrix k = (scale * sq.cwiseMax(0.0)).array().exp().matrix();
    total += a.weights().segment(r0, rows).dot(k * b.weights());
  }
  return total;
}

double mmd2(const PointSet& a, const PointSet& b, double bandwidth, MmdEstimator estimator) {
  check_dims(a, b);
  if (estimator == MmdEstimator::biased) {
    const double value = weighted_gram_mean(a, a, bandwidth) -
                         2.0 * weighted_gram_mean(a, b, bandwidth) +
                         weighted_gram_mean(b, b, bandwidth);
    return std::max(value, 0.0);
  }
  if (!a.has_uniform_weights() || !b.has_uniform_weights()) {
    throw InvalidArgument("mmd2: unbiased estimator requires uniform weights");
  }
  if (a.size() < 2 || b.size() < 2) {
    throw InvalidArgument("mmd2: unbiased estimator needs at least 2 points per set");
  }
  auto within = [bandwidth](const PointSet& s) {
    const Matrix k = gram(s, s, bandwidth);
    const double n = static_cast<double>(s.size());
    return (k.sum() - k.trace()) / (n * (n - 1.0));
  };
  return within(a) + within(b) - 2.0 * gram(a, b, bandwidth).mean();
}

double mmd2(const PointSet& a, const PointSet& b, const KernelConfig& k, MmdEstimator estimator) {
  return mmd2(a, b, resolve_bandwidth(a, b, k), estimator);
}

double median_heuristic(std::span<const PointSet* const> sets, std::size_t max_points) {
  std::size_t total = 0;
  for (const auto* s : sets) total += s->size();
  if (total < 2) {
    throw InvalidArgument("median heuristic needs at least two points");
  }
  const std::size_t stride = max_points == 0 ? 1 : (total + max_points - 1) / max_points;
  std::vector<Eigen::RowVectorXd> pool;
  pool.reserve(total / stride + 1);
  std::size_t k = 0;
  for (const auto* s : sets) {
    for (Eigen::Index i = 0; i < s->points().rows(); ++i, ++k) {
      if (k % stride == 0) pool.push_back(s->points().row(i));
    }
  }
  if (pool.size() < 2) {
    throw InvalidArgument("median heuristic needs at least two points");
  }
  std::vector<double> dist;
  dist.reserve(pool.size() * (pool.size() - 1) / 2);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      dist.push_back((pool[i] - pool[j]).norm());
    }
  }
  const auto mid = dist.begin() + static_cast<std::ptrdiff_t>((dist.size() - 1) / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  if (!(*mid > 0.0)) {
    throw InvalidArgument("median heuristic: median pairwise distance is zero");
  }
  return *mid;
}

double mmd_deviation_bound(double n, double k_bound, double eps) {
  if (!(n > 0) || !(k_bound > 0) || !(eps > 0)) {
    throw InvalidArgument("mmd_deviation_bound: arguments must be positive");
  }
  const double half = std::floor(n / 2.0);
  return std::clamp(std::exp(-eps * eps * half / (8.0 * k_bound * k_bound)), 0.0, 1.0);
}

double mmd2_gaussian_approx(const Vector& m1, const Vector& m2, double sigma, double sigma_k,
                            double d) {
  if (!(sigma > 0) || !(sigma_k > 0)) {
    throw InvalidArgument("mmd2_gaussian_approx: bandwidths must be positive");
  }
  if (m1.size() != m2.size()) {
    throw InvalidArgument("mmd2_gaussian_approx: mean dimension mismatch");
  }
  if (d < 0) {
    throw InvalidArgument("mmd2_gaussian_approx: dimension must be nonnegative");
  }
  const double base = 1.0 + 2.0 * sigma * sigma / (sigma_k * sigma_k);
  return (m1 - m2).squaredNorm() / (sigma_k * sigma_k * std::pow(base, d / 2.0 + 1.0));
}

}  // namespace distclass
