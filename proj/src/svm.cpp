#include "distclass/svm.hpp"

#include "distclass/error.hpp"
#include "distclass/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <random>

namespace distclass {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_problem(Eigen::Index rows, const std::vector<int>& y, double c) {
  if (rows == 0) {
    throw InvalidArgument("svm: empty training set");
  }
  if (static_cast<std::size_t>(rows) != y.size()) {
    throw InvalidArgument("svm: label count does not match rows");
  }
  for (int v : y) {
    if (v != 1 && v != -1) throw InvalidArgument("svm: labels must be +1 or -1");
  }
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw InvalidArgument("svm: C must be positive");
  }
}

// Returns the common label if all labels agree, 0 otherwise.
int common_label(const std::vector<int>& y) {
  for (int v : y) {
    if (v != y.front()) return 0;
  }
  return y.front();
}

bool in_up(int y, double a, double c) { return (y == 1 && a < c) || (y == -1 && a > 0.0); }
bool in_low(int y, double a, double c) { return (y == 1 && a > 0.0) || (y == -1 && a < c); }

struct SmoOutcome {
  Vector alpha;
  double bias = 0.0;
  double violation = 0.0;
  long iterations = 0;
  bool converged = false;
};

SmoOutcome smo(const Matrix& k, const std::vector<int>& y, double c, double tol, long max_iter) {
  const Eigen::Index n = k.rows();
  Vector alpha = Vector::Zero(n);
  Vector grad = Vector::Constant(n, -1.0);  // G = Q a - e
  SmoOutcome out;
  for (;;) {
    double gmax = -kInf;
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (in_up(y[t], alpha[t], c) && -y[t] * grad[t] > gmax) {
        gmax = -y[t] * grad[t];
        i = t;
      }
    }
    double gmin = kInf;
    Eigen::Index j = -1;
    double best = kInf;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!in_low(y[t], alpha[t], c)) continue;
      const double v = -y[t] * grad[t];
      gmin = std::min(gmin, v);
      if (i >= 0 && v < gmax) {
        const double b = gmax - v;
        double a = k(i, i) + k(t, t) - 2.0 * k(i, t);
        if (a <= 0.0) a = kTau;
        const double obj = -(b * b) / a;
        if (obj < best) {
          best = obj;
          j = t;
        }
      }
    }
    out.violation = (i < 0 || gmin == kInf) ? 0.0 : std::max(0.0, gmax - gmin);
    if (i < 0 || j < 0 || gmax - gmin < tol) {
      out.converged = true;
      break;
    }
    if (out.iterations >= max_iter) {
      break;
    }
    ++out.iterations;

    const double ai = alpha[i];
    const double aj = alpha[j];
    const double yi = y[i];
    const double yj = y[j];
    const double qij = yi * yj * k(i, j);
    if (y[i] != y[j]) {
      double quad = k(i, i) + k(j, j) + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = k(i, i) + k(j, j) - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }
    const double di = alpha[i] - ai;
    const double dj = alpha[j] - aj;
    for (Eigen::Index t = 0; t < n; ++t) {
      grad[t] += y[t] * (yi * k(t, i) * di + yj * k(t, j) * dj);
    }
  }

  // rho as in the usual SMO derivation; the bias is -rho.
  double free_sum = 0.0;
  int free_count = 0;
  double ub = kInf, lb = -kInf;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= c) {
      if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      free_sum += yg;
      ++free_count;
    }
  }
  const double rho = free_count > 0 ? free_sum / free_count : 0.5 * (ub + lb);
  out.bias = -rho;
  out.alpha = std::move(alpha);
  return out;
}

}  // namespace

LinearSvmResult train_linear_svm(const Matrix& x, const std::vector<int>& y, double c,
                                 const LinearSvmOptions& options) {
  check_problem(x.rows(), y, c);
  const Eigen::Index n = x.rows();
  LinearSvmResult r;
  r.w = Vector::Zero(x.cols());
  r.alpha = Vector::Zero(n);
  if (const int label = common_label(y); label != 0) {
    r.bias = label;
    r.trivial = true;
    r.converged = true;
    return r;
  }

  Vector qd(n);
  for (Eigen::Index i = 0; i < n; ++i) qd[i] = x.row(i).squaredNorm() + 1.0;
  // Rows as columns for contiguous dot products.
  const Matrix xt = x.transpose();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(options.seed);

  auto dual = [&] { return r.alpha.sum() - 0.5 * (r.w.squaredNorm() + r.bias * r.bias); };
  r.dual_objective.push_back(dual());
  for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double pg_max = -kInf, pg_min = kInf;
    for (auto i : order) {
      const double yi = y[static_cast<std::size_t>(i)];
      const double g = yi * (r.w.dot(xt.col(i)) + r.bias) - 1.0;
      double pg = g;
      if (r.alpha[i] <= 0.0) {
        pg = std::min(g, 0.0);
      } else if (r.alpha[i] >= c) {
        pg = std::max(g, 0.0);
      }
      pg_max = std::max(pg_max, pg);
      pg_min = std::min(pg_min, pg);
      if (pg != 0.0) {
        const double old = r.alpha[i];
        r.alpha[i] = std::clamp(old - g / qd[i], 0.0, c);
        const double step = (r.alpha[i] - old) * yi;
        r.w.noalias() += step * xt.col(i);
        r.bias += step;
      }
    }
    ++r.epochs;
    r.dual_objective.push_back(dual());
    if (pg_max - pg_min <= options.tol) {
      r.converged = true;
      break;
    }
  }
  return r;
}

KernelSvmResult train_kernel_svm(const Matrix& gram, const std::vector<int>& y, double c,
                                 const KernelSvmOptions& options) {
  check_problem(gram.rows(), y, c);
  if (gram.rows() != gram.cols()) {
    throw InvalidArgument("svm: Gram matrix must be square");
  }
  const Eigen::Index n = gram.rows();
  KernelSvmResult r;
  if (const int label = common_label(y); label != 0) {
    r.alpha = Vector::Zero(n);
    r.bias = label;
    r.trivial = true;
    r.converged = true;
    return r;
  }
  const long max_iter =
      options.max_iter > 0 ? options.max_iter : std::max<long>(10'000'000L, 100L * n);
  SmoOutcome s = smo(gram, y, c, options.tol, max_iter);
  if (!s.converged) {
    const Vector eig = sym_eigenvalues(gram);
    const double scale = std::max(1.0, gram.diagonal().cwiseAbs().mean());
    r.diagonal_shift = std::max(0.0, -eig[n - 1]) + 1e-8 * scale;
    std::cerr << "warning: kernel svm stalled after " << s.iterations
              << " iterations; retrying with diagonal shift " << r.diagonal_shift << "\n";
    Matrix shifted = gram;
    shifted.diagonal().array() += r.diagonal_shift;
    s = smo(shifted, y, c, options.tol, max_iter);
  }
  r.alpha = std::move(s.alpha);
  r.bias = s.bias;
  r.kkt_violation = s.violation;
  r.iterations = s.iterations;
  r.converged = s.converged;
  return r;
}

double kkt_violation(const Matrix& gram, const std::vector<int>& y, const Vector& alpha,
                     double c) {
  const Eigen::Index n = gram.rows();
  Vector ya(n);
  for (Eigen::Index t = 0; t < n; ++t) ya[t] = y[static_cast<std::size_t>(t)] * alpha[t];
  const Vector ky = gram * ya;
  double gmax = -kInf, gmin = kInf;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double g = y[static_cast<std::size_t>(t)] * ky[t] - 1.0;
    const double v = -y[static_cast<std::size_t>(t)] * g;
    if (in_up(y[static_cast<std::size_t>(t)], alpha[t], c)) gmax = std::max(gmax, v);
    if (in_low(y[static_cast<std::size_t>(t)], alpha[t], c)) gmin = std::min(gmin, v);
  }
  if (gmax == -kInf || gmin == kInf) return 0.0;
  return std::max(0.0, gmax - gmin);
}

}  // namespace distclass
