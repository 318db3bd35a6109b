#include "lanestp/frame.hpp"

#include <stdexcept>

namespace lanestp {

void CameraModel::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera image size must be positive");
}

CameraModel CameraModel::level(double height_m, double fx, double fy, double cx, double cy,
                               int width, int height) {
  Eigen::Matrix3d r;
  // Columns: camera x (right), y (down), z (forward) in vehicle coordinates.
  r << 1, 0, 0,
       0, 0, 1,
       0, -1, 0;
  CameraModel cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  cam.width = width;
  cam.height = height;
  cam.extrinsic = EgoPose(r, Eigen::Vector3d(0.0, 0.0, height_m));
  return cam;
}

std::optional<Eigen::Vector2d> CameraModel::project(const Eigen::Vector3d& p) const {
  if (p.z() <= 1e-9) return std::nullopt;
  return Eigen::Vector2d(cx + fx * p.x() / p.z(), cy + fy * p.y() / p.z());
}

Eigen::Vector3d CameraModel::back_project(const Eigen::Vector2d& pixel) const {
  return Eigen::Vector3d((pixel.x() - cx) / fx, (pixel.y() - cy) / fy, 1.0).normalized();
}

}  // namespace lanestp
