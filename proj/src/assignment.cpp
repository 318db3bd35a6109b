#include "lanestp/assignment.hpp"

#include <limits>
#include <stdexcept>

namespace lanestp {

namespace {

// Potentials-based Hungarian method; requires rows <= cols.
std::vector<int> hungarian(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
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
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace

Assignment solve_assignment(const Eigen::Ref<const Eigen::MatrixXd>& cost) {
  if (!cost.allFinite()) throw std::invalid_argument("assignment cost must be finite");
  Assignment result;
  if (cost.rows() == 0 || cost.cols() == 0) {
    result.row_to_col.assign(cost.rows(), -1);
    return result;
  }
  if (cost.rows() <= cost.cols()) {
    result.row_to_col = hungarian(cost);
  } else {
    const std::vector<int> col_to_row = hungarian(cost.transpose());
    result.row_to_col.assign(cost.rows(), -1);
    for (std::size_t c = 0; c < col_to_row.size(); ++c) result.row_to_col[col_to_row[c]] = int(c);
  }
  for (std::size_t r = 0; r < result.row_to_col.size(); ++r) {
    if (result.row_to_col[r] >= 0) result.total_cost += cost(Eigen::Index(r), result.row_to_col[r]);
  }
  return result;
}

}  // namespace lanestp
