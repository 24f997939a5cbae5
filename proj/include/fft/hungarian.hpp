#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace fft {

struct AssignmentResult {
  // row_to_col[i] is the column assigned to row i, or -1.
  std::vector<int> row_to_col;
  double total_cost = 0.0;
};

namespace detail {

// Kuhn-Munkres with potentials and shortest augmenting paths, O(n^2 m).
// Requires rows <= cols; every row ends up assigned.
inline std::vector<int> assign_rows(const std::vector<std::vector<double>>& a) {
  const int n = static_cast<int>(a.size());
  const int m = n ? static_cast<int>(a[0].size()) : 0;
  constexpr double kInf = std::numeric_limits<double>::infinity();

  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace detail

// Minimum-cost one-to-one assignment over a rectangular cost matrix.
// The smaller dimension is fully assigned; the rest map to -1.
inline AssignmentResult solve_assignment(const std::vector<std::vector<double>>& cost) {
  const std::size_t rows = cost.size();
  const std::size_t cols = rows ? cost[0].size() : 0;
  for (const auto& row : cost) {
    if (row.size() != cols) throw std::invalid_argument("solve_assignment: ragged cost matrix");
    for (double c : row)
      if (!std::isfinite(c)) throw std::invalid_argument("solve_assignment: non-finite cost");
  }

  AssignmentResult res;
  res.row_to_col.assign(rows, -1);
  if (rows == 0 || cols == 0) return res;

  if (rows <= cols) {
    res.row_to_col = detail::assign_rows(cost);
  } else {
    std::vector<std::vector<double>> t(cols, std::vector<double>(rows));
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) t[j][i] = cost[i][j];
    const std::vector<int> col_to_row = detail::assign_rows(t);
    for (std::size_t j = 0; j < cols; ++j)
      if (col_to_row[j] >= 0) res.row_to_col[col_to_row[j]] = static_cast<int>(j);
  }
  for (std::size_t i = 0; i < rows; ++i)
    if (res.row_to_col[i] >= 0) res.total_cost += cost[i][res.row_to_col[i]];
  return res;
}

}  // namespace fft
