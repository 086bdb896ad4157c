#include "distclass/error.hpp"
#include "distclass/ot.hpp"

#include <algorithm>
#include <limits>

namespace distclass {

// Shortest augmenting path with row/column potentials (Jonker-Volgenant
// style Hungarian method). Index 0 of the 1-based work arrays is a sentinel.
std::vector<std::size_t> solve_assignment(const Matrix& cost) {
  if (cost.rows() != cost.cols()) {
    throw InvalidArgument("assignment: cost matrix must be square");
  }
  if (!cost.allFinite()) {
    throw InvalidArgument("assignment: non-finite cost");
  }
  const std::size_t n = static_cast<std::size_t>(cost.rows());
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> row_of_col(n + 1, 0), way(n + 1, 0);
  std::vector<double> min_to(n + 1);
  std::vector<char> used(n + 1);

  for (std::size_t row = 1; row <= n; ++row) {
    row_of_col[0] = row;
    std::size_t col0 = 0;
    std::fill(min_to.begin(), min_to.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const std::size_t i0 = row_of_col[col0];
      double delta = kInf;
      std::size_t col1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) {
          continue;
        }
        const double reduced = cost(static_cast<Eigen::Index>(i0 - 1),
                                    static_cast<Eigen::Index>(j - 1)) -
                               u[i0] - v[j];
        if (reduced < min_to[j]) {
          min_to[j] = reduced;
          way[j] = col0;
        }
        if (min_to[j] < delta) {
          delta = min_to[j];
          col1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          min_to[j] -= delta;
        }
      }
      col0 = col1;
    } while (row_of_col[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      row_of_col[col0] = row_of_col[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) {
    assignment[row_of_col[j] - 1] = j - 1;
  }
  return assignment;
}

}  // namespace distclass
