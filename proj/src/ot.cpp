#include "distclass/ot.hpp"

#include "distclass/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace distclass {

namespace {

constexpr double kWeightTol = 1e-9;
// Scaling vectors are folded back into the log potentials after this many
// multiplicative iterations, or earlier if they leave the safe range.
constexpr int kAbsorbEvery = 20;
constexpr double kScalingBound = 1e100;
// Each epsilon-scaling stage shrinks the regularization by this factor.
constexpr double kStageFactor = 0.25;
constexpr int kStageIterCap = 200;

void check_weights(const Vector& w, const char* what) {
  if (w.size() == 0) {
    throw InvalidArgument(std::string("sinkhorn: empty ") + what);
  }
  if (!w.allFinite() || w.minCoeff() < 0.0 || std::abs(w.sum() - 1.0) > kWeightTol) {
    throw InvalidArgument(std::string("sinkhorn: invalid ") + what);
  }
}

double log_sum_exp(const double* x, Eigen::Index n, Eigen::Index stride) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) mx = std::max(mx, x[k * stride]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) s += std::exp(x[k * stride] - mx);
  return mx + std::log(s);
}

// Working state of the stabilized iteration on the positive-weight support.
class SinkhornSolver {
 public:
  SinkhornSolver(const Matrix& cost, const Vector& a, const Vector& b)
      : cost_(cost), a_(a), b_(b), log_a_(a.array().log()), log_b_(b.array().log()),
        f_(Vector::Zero(a.size())), g_(Vector::Zero(b.size())),
        u_(Vector::Ones(a.size())), v_(Vector::Ones(b.size())),
        work_(cost.rows(), cost.cols()) {}

  // Runs at regularization `eps` until the row violation drops to `tol` or
  // `budget` iterations are spent. Returns true on convergence.
  bool run(double eps, double tol, int budget) {
    if (since_absorb_ > 0 && scalings_healthy()) {
      f_ += eps_ * u_.array().log().matrix();
      g_ += eps_ * v_.array().log().matrix();
      since_absorb_ = 0;
    }
    eps_ = eps;
    const int stop_at = iterations_ + budget;
    reset_kernel();
    Vector kv = kernel_ * v_;
    for (;;) {
      const double violation = (u_.cwiseProduct(kv) - a_).cwiseAbs().maxCoeff();
      if (std::isnan(violation)) {
        throw NumericalError("numerical overflow; increase reg");
      }
      if (violation <= tol) {
        return true;
      }
      if (iterations_ >= stop_at) {
        return false;
      }
      u_ = a_.cwiseQuotient(kv);
      const Vector ktu = kernel_.transpose() * u_;
      v_ = b_.cwiseQuotient(ktu);
      ++iterations_;
      ++since_absorb_;
      if (!scalings_healthy() || since_absorb_ >= kAbsorbEvery) {
        absorb();
      }
      kv = kernel_ * v_;
    }
  }

  Matrix plan() const { return u_.asDiagonal() * kernel_ * v_.asDiagonal(); }
  int iterations() const { return iterations_; }

 private:
  bool scalings_healthy() const {
    auto ok = [](const Vector& s) {
      for (Eigen::Index k = 0; k < s.size(); ++k) {
        const double x = s[k];
        if (!(x > 1.0 / kScalingBound && x < kScalingBound)) return false;
      }
      return true;
    };
    return ok(u_) && ok(v_);
  }

  void rebuild_kernel() {
    for (Eigen::Index j = 0; j < cost_.cols(); ++j) {
      for (Eigen::Index i = 0; i < cost_.rows(); ++i) {
        kernel_(i, j) = std::exp((f_[i] + g_[j] - cost_(i, j)) / eps_);
      }
    }
  }

  void absorb() {
    if (!scalings_healthy()) {
      log_domain_step();
      return;
    }
    f_ += eps_ * u_.array().log().matrix();
    g_ += eps_ * v_.array().log().matrix();
    reset_kernel();
  }

  // Rebuilds the kernel from the potentials with unit scalings. A row or
  // column may underflow entirely; that case recovers with an exact
  // log-domain update.
  void reset_kernel() {
    u_.setOnes();
    v_.setOnes();
    since_absorb_ = 0;
    kernel_.resize(cost_.rows(), cost_.cols());
    rebuild_kernel();
    const bool rows_ok = (kernel_.rowwise().sum().array() > 0.0).all();
    const bool cols_ok = (kernel_.colwise().sum().array() > 0.0).all();
    if (!rows_ok || !cols_ok || !kernel_.allFinite()) {
      log_domain_step();
    }
  }

  // One exact Sinkhorn iteration on the log potentials.
  void log_domain_step() {
    const Eigen::Index n = cost_.rows();
    const Eigen::Index m = cost_.cols();
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        work_(i, j) = (g_[j] - cost_(i, j)) / eps_;
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      f_[i] = eps_ * (log_a_[i] - log_sum_exp(&work_(i, 0), m, n));
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        work_(i, j) = (f_[i] - cost_(i, j)) / eps_;
      }
      g_[j] = eps_ * (log_b_[j] - log_sum_exp(&work_(0, j), n, 1));
    }
    if (!f_.allFinite() || !g_.allFinite()) {
      throw NumericalError("numerical overflow; increase reg");
    }
    u_.setOnes();
    v_.setOnes();
    since_absorb_ = 0;
    ++iterations_;
    kernel_.resize(n, m);
    rebuild_kernel();
  }

  const Matrix& cost_;
  const Vector& a_;
  const Vector& b_;
  Vector log_a_, log_b_;
  Vector f_, g_;
  Vector u_, v_;
  Matrix kernel_;
  Matrix work_;
  double eps_ = 1.0;
  int iterations_ = 0;
  int since_absorb_ = 0;
};

std::vector<Eigen::Index> positive_support(const Vector& w) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    if (w[k] > 0.0) idx.push_back(k);
  }
  return idx;
}

// Strict weak order used to orient pairs canonically.
bool canonical_less(const PointSet& a, const PointSet& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  if (a.dim() != b.dim()) return a.dim() < b.dim();
  const auto n = a.points().size();
  const double* pa = a.points().data();
  const double* pb = b.points().data();
  for (Eigen::Index k = 0; k < n; ++k) {
    if (pa[k] != pb[k]) return pa[k] < pb[k];
  }
  for (Eigen::Index k = 0; k < a.weights().size(); ++k) {
    if (a.weights()[k] != b.weights()[k]) return a.weights()[k] < b.weights()[k];
  }
  return false;
}

void require_uniform_equal(const PointSet& a, const PointSet& b, const char* who) {
  if (a.dim() != b.dim()) {
    throw InvalidArgument(std::string(who) + ": dimension mismatch");
  }
  if (a.size() != b.size()) {
    throw InvalidArgument(std::string(who) + ": oracle requires equal sizes");
  }
  if (!a.has_uniform_weights() || !b.has_uniform_weights()) {
    throw InvalidArgument("oracle requires uniform weights");
  }
}

}  // namespace

void SinkhornConfig::validate() const {
  if (!(reg > 0.0) || !std::isfinite(reg)) throw InvalidArgument("sinkhorn: reg must be > 0");
  if (!(tol > 0.0)) throw InvalidArgument("sinkhorn: tol must be > 0");
  if (max_iter < 1) throw InvalidArgument("sinkhorn: max_iter must be >= 1");
  if (!(p >= 1.0) || !std::isfinite(p)) throw InvalidArgument("sinkhorn: p must be >= 1");
}

Matrix cost_matrix(const PointSet& a, const PointSet& b, double p) {
  if (a.dim() != b.dim()) {
    throw InvalidArgument("cost_matrix: dimension mismatch (" + std::to_string(a.dim()) +
                          " vs " + std::to_string(b.dim()) + ")");
  }
  if (!(p >= 1.0)) {
    throw InvalidArgument("cost_matrix: p must be >= 1");
  }
  // Points as columns, so each difference reads contiguous memory.
  const Matrix x = a.points().transpose();
  const Matrix y = b.points().transpose();
  Matrix c(x.cols(), y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.cols(); ++i) {
      const double sq = (x.col(i) - y.col(j)).squaredNorm();
      c(i, j) = p == 2.0 ? sq : (p == 1.0 ? std::sqrt(sq) : std::pow(std::sqrt(sq), p));
    }
  }
  return c;
}

double median_entry(const Matrix& m) {
  if (m.size() == 0) {
    throw InvalidArgument("median of empty matrix");
  }
  std::vector<double> v(m.data(), m.data() + m.size());
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

SinkhornResult sinkhorn(const Matrix& cost, const Vector& a, const Vector& b,
                        const SinkhornConfig& cfg) {
  cfg.validate();
  check_weights(a, "row weights");
  check_weights(b, "column weights");
  if (cost.rows() != a.size() || cost.cols() != b.size()) {
    throw InvalidArgument("sinkhorn: cost shape does not match weights");
  }
  if (!cost.allFinite()) {
    throw InvalidArgument("sinkhorn: non-finite cost");
  }

  const auto rows = positive_support(a);
  const auto cols = positive_support(b);
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = static_cast<Eigen::Index>(cols.size());
  Matrix c(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      c(i, j) = cost(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
    }
  }
  Vector as(n), bs(m);
  for (Eigen::Index i = 0; i < n; ++i) as[i] = a[rows[static_cast<std::size_t>(i)]];
  for (Eigen::Index j = 0; j < m; ++j) bs[j] = b[cols[static_cast<std::size_t>(j)]];

  double scale = 1.0;
  if (cfg.normalize_median) {
    const double med = median_entry(c);
    if (med > 0.0) scale = med;
  }
  const double eps = cfg.reg * scale;

  SinkhornSolver solver(c, as, bs);
  bool converged = false;
  if (n == 1 || m == 1) {
    converged = solver.run(eps, cfg.tol, cfg.max_iter);
  } else {
    // Epsilon scaling: warm-start from coarser regularizations. The fixed
    // point at the target eps does not depend on the starting potentials.
    const double spread = c.maxCoeff() - c.minCoeff();
    double stage = std::max(eps, spread);
    while (stage > eps && solver.iterations() < cfg.max_iter) {
      const int budget = std::min(kStageIterCap, cfg.max_iter - solver.iterations());
      solver.run(stage, std::max(cfg.tol, 1e-3 / static_cast<double>(n)), budget);
      stage = std::max(eps, stage * kStageFactor);
    }
    const int remaining = cfg.max_iter - solver.iterations();
    converged = remaining > 0 && solver.run(eps, cfg.tol, remaining);
  }

  SinkhornResult out;
  TransportPlan& tp = out.transport;
  tp.plan = Matrix::Zero(cost.rows(), cost.cols());
  const Matrix sub = solver.plan();
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      tp.plan(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]) = sub(i, j);
    }
  }
  if (!tp.plan.allFinite()) {
    throw NumericalError("numerical overflow; increase reg");
  }
  tp.row_marginal = a;
  tp.col_marginal = b;
  tp.converged = converged;
  tp.iterations = solver.iterations();
  out.value = tp.plan.cwiseProduct(cost).sum();
  return out;
}

double wasserstein(const PointSet& a, const PointSet& b, const SinkhornConfig& cfg) {
  const bool swap = canonical_less(b, a);
  const PointSet& x = swap ? b : a;
  const PointSet& y = swap ? a : b;
  const Matrix c = cost_matrix(x, y, cfg.p);
  const SinkhornResult r = sinkhorn(c, x.weights(), y.weights(), cfg);
  const double value = std::max(r.value, 0.0);
  return cfg.p == 1.0 ? value : std::pow(value, 1.0 / cfg.p);
}

double exact_1d(const PointSet& a, const PointSet& b, double p) {
  require_uniform_equal(a, b, "exact_1d");
  if (a.dim() != 1) {
    throw InvalidArgument("exact_1d: points must be one-dimensional");
  }
  if (!(p >= 1.0)) {
    throw InvalidArgument("exact_1d: p must be >= 1");
  }
  std::vector<double> x(a.points().data(), a.points().data() + a.size());
  std::vector<double> y(b.points().data(), b.points().data() + b.size());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    total += std::pow(std::abs(x[i] - y[i]), p);
  }
  return std::pow(total / static_cast<double>(x.size()), 1.0 / p);
}

double exact_assignment(const PointSet& a, const PointSet& b, double p, std::size_t cap) {
  require_uniform_equal(a, b, "exact_assignment");
  if (a.size() > cap) {
    throw InvalidArgument("exact_assignment: " + std::to_string(a.size()) +
                          " points exceeds oracle cap " + std::to_string(cap));
  }
  const Matrix c = cost_matrix(a, b, p);
  const auto match = solve_assignment(c);
  double total = 0.0;
  for (std::size_t i = 0; i < match.size(); ++i) {
    total += c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(match[i]));
  }
  return std::pow(total / static_cast<double>(a.size()), 1.0 / p);
}

}  // namespace distclass
