#include "lanestp/pose.hpp"

#include <stdexcept>

namespace lanestp {

namespace {

void check_rigid(const Eigen::Matrix4d& m) {
  if (!m.allFinite()) throw std::invalid_argument("ego pose contains non-finite entries");
  const Eigen::RowVector4d bottom(0, 0, 0, 1);
  if ((m.row(3) - bottom).cwiseAbs().maxCoeff() > 1e-12) {
    throw std::invalid_argument("ego pose bottom row must be (0, 0, 0, 1)");
  }
  const Eigen::Matrix3d r = m.topLeftCorner<3, 3>();
  if ((r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
    throw std::invalid_argument("ego pose rotation is not orthonormal");
  }
  if (r.determinant() < 0) throw std::invalid_argument("ego pose rotation is a reflection");
}

}  // namespace

EgoPose::EgoPose(const Eigen::Matrix4d& matrix) : matrix_(matrix) { check_rigid(matrix_); }

EgoPose::EgoPose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : matrix_(Eigen::Matrix4d::Identity()) {
  matrix_.topLeftCorner<3, 3>() = rotation;
  matrix_.topRightCorner<3, 1>() = translation;
  check_rigid(matrix_);
}

EgoPose EgoPose::inverse() const {
  const Eigen::Matrix3d rt = rotation().transpose();
  return {rt, -rt * translation()};
}

EgoPose EgoPose::operator*(const EgoPose& rhs) const {
  return {rotation() * rhs.rotation(), rotation() * rhs.translation() + translation()};
}

EgoPose relative_pose(const EgoPose& source, const EgoPose& destination) {
  return destination.inverse() * source;
}

Eigen::MatrixX4d transform_points(const Eigen::Ref<const Eigen::MatrixX4d>& points,
                                  const EgoPose& transform) {
  Eigen::MatrixX4d out(points.rows(), 4);
  const Eigen::Matrix3d r = transform.rotation();
  const Eigen::Vector3d t = transform.translation();
  out.leftCols<3>() = (points.leftCols<3>() * r.transpose()).rowwise() + t.transpose();
  out.col(3) = points.col(3);
  return out;
}

Eigen::MatrixX4d propagate_points(const Eigen::Ref<const Eigen::MatrixX4d>& points,
                                  const EgoPose& source, const EgoPose& destination) {
  return transform_points(points, relative_pose(source, destination));
}

}  // namespace lanestp
