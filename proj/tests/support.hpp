#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "lanestp/pose.hpp"
#include "lanestp/spline.hpp"

namespace testing {

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

inline lanestp::EgoPose random_pose(std::mt19937_64& rng, double spread = 50.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  return {random_rotation(rng), Eigen::Vector3d(u(rng), u(rng), u(rng))};
}

inline Eigen::MatrixX4d random_points(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-30.0, 30.0), v(0.0, 1.0);
  Eigen::MatrixX4d p(n, 4);
  for (int i = 0; i < n; ++i) p.row(i) << u(rng), u(rng), u(rng), v(rng);
  return p;
}

/// Control points with the fixed y column and random x, z, v.
inline lanestp::ControlPoints random_control_points(std::mt19937_64& rng, const lanestp::CurveConfig& cfg,
                                                    double x_center = 0.0) {
  std::uniform_real_distribution<double> dx(-2.0, 2.0), dz(-1.0, 1.0), dv(0.0, 1.0);
  lanestp::ControlPoints p(cfg.num_control_points, 4);
  p.col(lanestp::kY) = lanestp::control_y(cfg);
  for (int j = 0; j < cfg.num_control_points; ++j) {
    p(j, lanestp::kX) = x_center + dx(rng);
    p(j, lanestp::kZ) = dz(rng);
    p(j, lanestp::kV) = dv(rng);
  }
  return p;
}

/// Minimum over all injective row -> column maps (rows <= cols).
inline double brute_force_assignment(const Eigen::MatrixXd& cost) {
  std::vector<int> cols(cost.cols());
  std::iota(cols.begin(), cols.end(), 0);
  double best = INFINITY;
  do {
    double s = 0.0;
    for (Eigen::Index r = 0; r < cost.rows(); ++r) s += cost(r, cols[r]);
    best = std::min(best, s);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

}  // namespace testing
