#include <cmath>
#include <limits>

#include "ewfm/error.hpp"
#include "ewfm/evaluation.hpp"
#include "ewfm/kernels.hpp"

namespace ewfm {

Matrix squared_distance_matrix(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw InvalidInput("distance matrix: dimension mismatch");
  const auto& k = kernels::active();
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i).data();
    double* ci = c.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) ci[j] = k.squared_distance(ai, b.row(j).data(), a.cols());
  }
  return c;
}

// Shortest augmenting path formulation with row/column potentials. Row i is
// inserted one at a time; columns are 1-based with column 0 as the sentinel.
Assignment solve_assignment(const Matrix& cost) {
  const std::size_t n = cost.rows();
  if (cost.cols() != n) throw InvalidInput("assignment: cost matrix must be square");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);

  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      const double* crow = cost.row(i0 - 1).data() - 1;
      const double ui0 = u[i0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = crow[j] - ui0 - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      if (j1 == 0) throw InvalidInput("assignment: cost matrix has non-finite entries");
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment out;
  out.row_to_col.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) {
    if (match[j] != 0) out.row_to_col[match[j] - 1] = j - 1;
  }
  // Sum the matched entries directly; -v[0] accumulates rounding.
  for (std::size_t i = 0; i < n; ++i) out.total_cost += cost(i, out.row_to_col[i]);
  return out;
}

}  // namespace ewfm
