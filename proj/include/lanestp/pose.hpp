#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace lanestp {

/// Rigid vehicle-to-world transform. Construction validates the bottom row and
/// orthonormality of the rotation block (|R^T R - I| <= 1e-9).
class EgoPose {
 public:
  EgoPose() : matrix_(Eigen::Matrix4d::Identity()) {}
  explicit EgoPose(const Eigen::Matrix4d& matrix);
  EgoPose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static EgoPose from_translation(const Eigen::Vector3d& translation) {
    return {Eigen::Matrix3d::Identity(), translation};
  }

  const Eigen::Matrix4d& matrix() const { return matrix_; }
  Eigen::Matrix3d rotation() const { return matrix_.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return matrix_.topRightCorner<3, 1>(); }

  /// Closed-form inverse (R^T, -R^T t).
  EgoPose inverse() const;
  EgoPose operator*(const EgoPose& rhs) const;
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const { return rotation() * p + translation(); }

 private:
  Eigen::Matrix4d matrix_;
};

/// Relative transform E_dst^{-1} * E_src taking source-frame coordinates into
/// the destination frame.
EgoPose relative_pose(const EgoPose& source, const EgoPose& destination);

/// Maps the xyz columns of (x, y, z, v) rows from the source ego frame into the
/// destination ego frame. The v column is copied untouched.
Eigen::MatrixX4d propagate_points(const Eigen::Ref<const Eigen::MatrixX4d>& points,
                                  const EgoPose& source, const EgoPose& destination);

/// Applies a rigid transform to the xyz columns; v is copied untouched.
Eigen::MatrixX4d transform_points(const Eigen::Ref<const Eigen::MatrixX4d>& points,
                                  const EgoPose& transform);

}  // namespace lanestp
