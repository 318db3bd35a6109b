#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace lanestp {

/// Column layout of a control point / sample row.
enum Coord : int { kX = 0, kY = 1, kZ = 2, kV = 3 };

template <typename Scalar>
using ControlPointsT = Eigen::Matrix<Scalar, Eigen::Dynamic, 4>;
using ControlPoints = ControlPointsT<double>;

/// Lane curve geometry: M control points with a fixed uniform y column on
/// [y_start, y_end], x and z predicted inside their ranges, S dense samples.
struct CurveConfig {
  int num_control_points = 20;
  double y_start = 3.0;
  double y_end = 103.0;
  double x_start = -20.0;
  double x_end = 20.0;
  double z_start = -5.0;
  double z_end = 5.0;
  int num_samples = 100;

  void validate() const;
  bool operator==(const CurveConfig&) const = default;
};

/// Catmull-Rom coefficient matrix for one segment. Row order matches the
/// argument vector [t^3 t^2 t 1]; columns weight p_{j-1}, p_j, p_{j+1}, p_{j+2}.
template <typename Scalar = double>
Eigen::Matrix<Scalar, 4, 4> catmull_rom_coefficients() {
  Eigen::Matrix<Scalar, 4, 4> m;
  m << -1, 3, -3, 1,
        2, -5, 4, -1,
       -1, 0, 1, 0,
        0, 2, 0, 0;
  return m * Scalar(0.5);
}

/// The four segment basis polynomials (or their derivatives w.r.t. the local
/// argument) at t in [0, 1].
template <typename Scalar>
Eigen::Matrix<Scalar, 1, 4> segment_weights(Scalar t, int order) {
  Eigen::Matrix<Scalar, 1, 4> powers;
  switch (order) {
    case 0: powers << t * t * t, t * t, t, Scalar(1); break;
    case 1: powers << Scalar(3) * t * t, Scalar(2) * t, Scalar(1), Scalar(0); break;
    case 2: powers << Scalar(6) * t, Scalar(2), Scalar(0), Scalar(0); break;
    default: throw std::invalid_argument("derivative order must be 0, 1 or 2");
  }
  return powers * catmull_rom_coefficients<Scalar>();
}

/// Value of one CR segment at local argument t for support values (p0..p3).
template <typename Scalar>
Scalar evaluate_segment(Scalar t, const Eigen::Matrix<Scalar, 4, 1>& support) {
  if (!(t >= Scalar(0) && t <= Scalar(1))) {
    throw std::domain_error("local segment argument outside [0, 1]");
  }
  return segment_weights<Scalar>(t, 0) * support;
}

/// Dense evaluation matrix: row r folds the segment basis at sample_args[r]
/// into the M global columns. Derivative rows are taken w.r.t. the global s.
template <typename Scalar>
struct BasisMatrixT {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> weights;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> sample_args;
  int derivative_order = 0;

  Eigen::Index rows() const { return weights.rows(); }
  Eigen::Index cols() const { return weights.cols(); }
};
using BasisMatrix = BasisMatrixT<double>;

/// Segment index and local argument for global s with uniform knots k/(M-1).
/// Arguments within 1e-12 of a knot snap onto it so knots interpolate exactly.
template <typename Scalar>
std::pair<int, Scalar> locate_segment(Scalar s, int num_control_points) {
  const int segments = num_control_points - 1;
  Scalar u = s * Scalar(segments);
  const Scalar nearest = std::round(u);
  if (std::abs(u - nearest) < Scalar(1e-12)) u = nearest;
  int k = static_cast<int>(std::floor(u));
  if (k >= segments) k = segments - 1;
  if (k < 0) k = 0;
  return {k, u - Scalar(k)};
}

/// Builds the basis with reflected phantom end points p_{-1} = 2p_0 - p_1 and
/// p_M = 2p_{M-1} - p_{M-2}.
template <typename Scalar>
BasisMatrixT<Scalar> build_basis(int num_control_points,
                                 const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& sample_args,
                                 int order = 0) {
  if (num_control_points < 4) {
    throw std::invalid_argument("Catmull-Rom basis needs at least 4 control points");
  }
  if (order < 0 || order > 2) {
    throw std::invalid_argument("derivative order must be 0, 1 or 2");
  }
  const int m = num_control_points;
  BasisMatrixT<Scalar> basis;
  basis.derivative_order = order;
  basis.sample_args = sample_args;
  basis.weights.setZero(sample_args.size(), m);

  // d/ds = (M-1) d/dt for uniform knots.
  const Scalar chain = std::pow(Scalar(m - 1), order);
  for (Eigen::Index r = 0; r < sample_args.size(); ++r) {
    const Scalar s = sample_args[r];
    if (!(s >= Scalar(0) && s <= Scalar(1))) {
      throw std::domain_error("curve argument outside [0, 1]: " + std::to_string(double(s)));
    }
    const auto [k, t] = locate_segment(s, m);
    const Eigen::Matrix<Scalar, 1, 4> w = segment_weights(t, order) * chain;
    for (int c = 0; c < 4; ++c) {
      const int j = k - 1 + c;
      if (j < 0) {
        basis.weights(r, 0) += Scalar(2) * w[c];
        basis.weights(r, 1) -= w[c];
      } else if (j >= m) {
        basis.weights(r, m - 1) += Scalar(2) * w[c];
        basis.weights(r, m - 2) -= w[c];
      } else {
        basis.weights(r, j) += w[c];
      }
    }
  }
  return basis;
}

template <typename Scalar>
BasisMatrixT<Scalar> build_basis(const CurveConfig& cfg,
                                 const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& sample_args,
                                 int order = 0) {
  cfg.validate();
  return build_basis<Scalar>(cfg.num_control_points, sample_args, order);
}

/// Samples of one curve: rows (x, y, z, v) at sample_args.
struct SampledCurve {
  Eigen::Matrix<double, Eigen::Dynamic, 4> samples;
  Eigen::VectorXd sample_args;
};

template <typename Scalar>
ControlPointsT<Scalar> evaluate_curve(const ControlPointsT<Scalar>& points,
                                      const BasisMatrixT<Scalar>& basis) {
  if (basis.cols() != points.rows()) {
    throw std::invalid_argument("basis has " + std::to_string(basis.cols()) +
                                " columns but curve has " + std::to_string(points.rows()) +
                                " control points");
  }
  return basis.weights * points;
}

inline SampledCurve sample_curve(const ControlPoints& points, const BasisMatrix& basis) {
  return {evaluate_curve(points, basis), basis.sample_args};
}

/// Uniformly spaced arguments 0 .. 1 inclusive.
Eigen::VectorXd uniform_args(int count);

/// Knot arguments k/(M-1).
Eigen::VectorXd knot_args(int num_control_points);

/// Curve argument for a longitudinal position.
double arg_for_y(double y, const CurveConfig& cfg);
Eigen::VectorXd args_for_y(const Eigen::Ref<const Eigen::VectorXd>& y, const CurveConfig& cfg);

/// Fixed uniform y column of every lane.
Eigen::VectorXd control_y(const CurveConfig& cfg);

/// Least-squares control points for dense (x, y, z, v) rows. The y column is
/// the fixed uniform grid and visibility is clamped to [0, 1].
ControlPoints fit_control_points(const Eigen::Ref<const Eigen::MatrixX4d>& dense,
                                 const CurveConfig& cfg);

/// Thread-safe memo of basis matrices keyed by (M, order, sample_args).
class BasisCache {
 public:
  BasisCache();
  ~BasisCache();
  BasisCache(const BasisCache&) = delete;
  BasisCache& operator=(const BasisCache&) = delete;

  std::shared_ptr<const BasisMatrix> get(int num_control_points, const Eigen::VectorXd& sample_args,
                                         int order = 0);
  std::size_t size() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lanestp
