#pragma once

#include <vector>

#include <Eigen/Core>

namespace lanestp {

struct Assignment {
  std::vector<int> row_to_col;  // -1 when the row is unassigned
  double total_cost = 0.0;
};

/// Exact minimum-cost assignment (Hungarian / shortest augmenting path) for a
/// rows x cols cost matrix. Every row is assigned when rows <= cols; when
/// rows > cols every column is assigned instead.
Assignment solve_assignment(const Eigen::Ref<const Eigen::MatrixXd>& cost);

}  // namespace lanestp
