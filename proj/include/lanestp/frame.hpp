#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "lanestp/pose.hpp"

namespace lanestp {

/// Pinhole camera. The extrinsic maps camera coordinates (x right, y down,
/// z forward) into the vehicle frame (x right, y forward, z up).
struct CameraModel {
  double fx = 1000.0;
  double fy = 1000.0;
  double cx = 480.0;
  double cy = 360.0;
  int width = 960;
  int height = 720;
  EgoPose extrinsic;

  void validate() const;

  /// Level camera mounted `height_m` above the vehicle origin looking along +y.
  static CameraModel level(double height_m, double fx = 1000.0, double fy = 1000.0,
                           double cx = 480.0, double cy = 360.0, int width = 960,
                           int height = 720);

  bool in_image(const Eigen::Vector2d& pixel) const {
    return pixel.x() >= 0.0 && pixel.y() >= 0.0 && pixel.x() <= width && pixel.y() <= height;
  }
  /// Pixel of a camera-frame point; nullopt behind the image plane.
  std::optional<Eigen::Vector2d> project(const Eigen::Vector3d& camera_point) const;
  /// Unit viewing direction of a pixel in camera coordinates.
  Eigen::Vector3d back_project(const Eigen::Vector2d& pixel) const;
};

/// One labelled lane: (x, y, z, v) rows ordered by increasing y.
struct Lane {
  int id = 0;
  int category = 0;
  Eigen::MatrixX4d points;
};

struct LaneFrame {
  int frame_id = 0;
  double timestamp_s = 0.0;
  EgoPose ego_pose;
  CameraModel camera;
  std::vector<Lane> lanes;
};

}  // namespace lanestp
