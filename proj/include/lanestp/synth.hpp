#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "lanestp/autolabel.hpp"
#include "lanestp/frame.hpp"

namespace lanestp {

/// Road description. The centerline is x(y) = sum_i c_i y^i with height
/// z(y) = grade*y + crest_grade*L/(2 pi)*(1 - cos(2 pi y / L)), so the
/// longitudinal slope never exceeds |grade| + |crest_grade|.
struct SceneSpec {
  int num_lanes = 4;
  double lane_spacing = 3.5;
  std::vector<double> centerline{0.0};
  double grade = 0.0;
  double crest_grade = 0.0;
  double crest_period = 400.0;
  int frames = 200;
  double speed = 10.0;  // m/s
  double dt = 0.1;      // s
  std::uint64_t seed = 0;
  double sample_step = 0.5;  // dense lane sampling along y
  double lookahead = 300.0;  // lane extent beyond the last pose
  int num_categories = 3;

  void validate() const;
};

struct World {
  SceneSpec spec;
  std::vector<Lane> lanes;  // world frame, dense, v = 1
  Trajectory trajectory;
};

Eigen::Vector3d centerline_point(const SceneSpec& spec, double y);
/// d/dy of the centerline point.
Eigen::Vector3d centerline_tangent(const SceneSpec& spec, double y);

World gen_scene(const SceneSpec& spec);

/// Ground-truth frames in each pose's ego frame, clipped to y in [0, range]
/// and sampled every `step` metres of y.
std::vector<LaneFrame> ground_truth_frames(const World& world, const CameraModel& camera,
                                           double range = 250.0, double step = 2.0);

/// Pinhole projection of the lanes seen from frame `frame`. Points behind the
/// camera, outside the image or beyond `max_range` metres ahead are dropped.
/// Gaussian pixel noise is drawn from `rng` when sigma > 0.
std::vector<Detection2D> render_2d(const World& world, int frame, const CameraModel& camera,
                                   double pixel_noise_sigma, std::mt19937_64& rng,
                                   double max_range = 100.0);

/// render_2d for every frame with one generator seeded by `seed`.
std::vector<std::vector<Detection2D>> render_sequence(const World& world, const CameraModel& camera,
                                                      double pixel_noise_sigma, std::uint64_t seed,
                                                      double max_range = 100.0);

/// Axis-aligned box in the ego frame.
struct Obstacle {
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Ones();

  void validate() const;
};

/// Slab test for the closed segment [a, b] against a box.
bool segment_intersects_box(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Obstacle& box);

/// Visibility of ego-frame points seen from `eye`: false when the sight line
/// crosses any obstacle.
std::vector<char> occlusion_flags(const Eigen::Ref<const Eigen::MatrixX4d>& points,
                                  const Eigen::Vector3d& eye, const std::vector<Obstacle>& obstacles);

/// Copies of `frames` with v = 0 on occluded points. obstacles[k] belongs to
/// frames[k]; the eye is the camera position of each frame.
std::vector<LaneFrame> simulate_occlusion(const std::vector<LaneFrame>& frames,
                                          const std::vector<std::vector<Obstacle>>& obstacles);

}  // namespace lanestp
