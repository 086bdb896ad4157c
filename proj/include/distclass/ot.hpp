#pragma once

#include "distclass/core.hpp"

#include <cstddef>
#include <vector>

namespace distclass {

/// Entropic optimal-transport solver settings.
struct SinkhornConfig {
  /// Weight of the entropy term. Applied to the raw cost unless
  /// `normalize_median` is set, in which case the cost is first divided by
  /// its median.
  double reg = 0.01;
  int max_iter = 10000;
  /// L-infinity tolerance on the row-marginal violation.
  double tol = 1e-9;
  /// Wasserstein order.
  double p = 2.0;
  bool normalize_median = false;

  void validate() const;
};

struct TransportPlan {
  Matrix plan;
  Vector row_marginal;
  Vector col_marginal;
  bool converged = false;
  int iterations = 0;
};

struct SinkhornResult {
  TransportPlan transport;
  /// sum_ij plan_ij * cost_ij on the raw cost; the entropy term is excluded.
  double value = 0.0;
};

/// C_ij = ||a_i - b_j||_2^p.
Matrix cost_matrix(const PointSet& a, const PointSet& b, double p);

/// Median of all entries (lower median for even counts).
double median_entry(const Matrix& m);

/// Entropy-regularized transport between weight vectors `a` (rows) and `b`
/// (columns). Potentials are kept in the log domain; the scaling vectors
/// between absorptions are bounded so small `reg` does not underflow.
/// Non-convergence is reported through TransportPlan::converged, never by
/// exception; a NaN in the iterates throws NumericalError.
SinkhornResult sinkhorn(const Matrix& cost, const Vector& a, const Vector& b,
                        const SinkhornConfig& cfg);

/// (sinkhorn value)^(1/p) on cost_matrix(a, b, p). The pair is put in a
/// canonical orientation first, so the result is exactly symmetric.
double wasserstein(const PointSet& a, const PointSet& b, const SinkhornConfig& cfg);

/// Exact W_p on the line for equal-size uniform point sets, by the sorted
/// (quantile) coupling.
double exact_1d(const PointSet& a, const PointSet& b, double p);

/// Default size cap for exact_assignment.
inline constexpr std::size_t kAssignmentOracleCap = 256;

/// Exact W_p for equal-size uniform point sets via minimum-cost perfect
/// matching on cost_matrix(a, b, p).
double exact_assignment(const PointSet& a, const PointSet& b, double p,
                        std::size_t cap = kAssignmentOracleCap);

/// Minimum-cost perfect matching on a square cost matrix (Hungarian
/// algorithm, O(n^3)). Returns the column assigned to each row.
std::vector<std::size_t> solve_assignment(const Matrix& cost);

}  // namespace distclass
