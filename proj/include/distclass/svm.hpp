#pragma once

#include "distclass/core.hpp"

#include <cstdint>
#include <vector>

namespace distclass {

// Binary soft-margin SVM solvers. Labels are +1 / -1.

struct LinearSvmOptions {
  /// Stop when the spread of projected gradients drops below this.
  double tol = 1e-4;
  int max_epochs = 2000;
  /// Seeds the per-epoch visiting order.
  std::uint64_t seed = 1;
};

struct LinearSvmResult {
  Vector w;
  double bias = 0.0;
  Vector alpha;
  /// Dual objective e'a - |w_aug|^2 / 2 before the first epoch and after
  /// each epoch. Nondecreasing.
  std::vector<double> dual_objective;
  int epochs = 0;
  bool converged = false;
  /// All labels were equal; the machine is the constant sign.
  bool trivial = false;
};

/// L1-hinge SVM by dual coordinate descent, minimizing
///   |w|^2/2 + b^2/2 + C sum_i max(0, 1 - y_i (w.x_i + b)).
/// The bias is learned as the weight of an appended constant-one feature.
LinearSvmResult train_linear_svm(const Matrix& x, const std::vector<int>& y, double c,
                                 const LinearSvmOptions& options = {});

struct KernelSvmOptions {
  /// Maximal KKT violation at termination.
  double tol = 1e-3;
  /// 0 picks max(10^7, 100 n).
  long max_iter = 0;
};

struct KernelSvmResult {
  Vector alpha;
  double bias = 0.0;
  double kkt_violation = 0.0;
  long iterations = 0;
  bool converged = false;
  /// Added to the Gram diagonal when the first attempt stalled.
  double diagonal_shift = 0.0;
  bool trivial = false;
};

/// SMO with second-order working-set selection on a precomputed Gram
/// matrix. Decision value for a point with kernel row k: sum_i y_i a_i k_i + b.
/// If the solver stalls (typically on an indefinite Gram matrix) the
/// diagonal is shifted by the magnitude of the most negative eigenvalue and
/// the problem is solved again; the shift is logged to stderr.
KernelSvmResult train_kernel_svm(const Matrix& gram, const std::vector<int>& y, double c,
                                 const KernelSvmOptions& options = {});

/// max over I_up of -y_t G_t minus min over I_low of -y_t G_t, the
/// violation measure used as the stopping rule.
double kkt_violation(const Matrix& gram, const std::vector<int>& y, const Vector& alpha, double c);

}  // namespace distclass
