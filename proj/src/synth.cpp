#include "lanestp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lanestp {

void SceneSpec::validate() const {
  if (num_lanes < 1) throw std::invalid_argument("num_lanes must be at least 1");
  if (!(lane_spacing > 0.0)) throw std::invalid_argument("lane_spacing must be positive");
  if (centerline.empty()) throw std::invalid_argument("centerline needs at least one coefficient");
  if (!(crest_period > 0.0)) throw std::invalid_argument("crest_period must be positive");
  if (frames < 1) throw std::invalid_argument("frames must be at least 1");
  if (!(speed > 0.0) || !(dt > 0.0)) throw std::invalid_argument("speed and dt must be positive");
  if (!(sample_step > 0.0) || !(lookahead >= 0.0)) throw std::invalid_argument("invalid sampling");
  if (num_categories < 1) throw std::invalid_argument("num_categories must be at least 1");
  for (double c : centerline) {
    if (!std::isfinite(c)) throw std::invalid_argument("centerline coefficients must be finite");
  }
}

Eigen::Vector3d centerline_point(const SceneSpec& spec, double y) {
  double x = 0.0;
  for (auto it = spec.centerline.rbegin(); it != spec.centerline.rend(); ++it) x = x * y + *it;
  const double w = 2.0 * std::numbers::pi / spec.crest_period;
  const double z = spec.grade * y + spec.crest_grade / w * (1.0 - std::cos(w * y));
  return {x, y, z};
}

Eigen::Vector3d centerline_tangent(const SceneSpec& spec, double y) {
  double dx = 0.0;
  for (std::size_t i = spec.centerline.size(); i-- > 1;) dx = dx * y + double(i) * spec.centerline[i];
  const double w = 2.0 * std::numbers::pi / spec.crest_period;
  return {dx, 1.0, spec.grade + spec.crest_grade * std::sin(w * y)};
}

namespace {

// Arclength of the centerline between y0 and y1, 5-point Gauss-Legendre.
double arclength(const SceneSpec& spec, double y0, double y1) {
  static constexpr double kNodes[5] = {0.0, -0.5384693101056831, 0.5384693101056831,
                                       -0.9061798459386640, 0.9061798459386640};
  static constexpr double kWeights[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                         0.2369268850561891, 0.2369268850561891};
  const double mid = 0.5 * (y0 + y1), half = 0.5 * (y1 - y0);
  double sum = 0.0;
  for (int i = 0; i < 5; ++i) sum += kWeights[i] * centerline_tangent(spec, mid + half * kNodes[i]).norm();
  return half * sum;
}

// y reached after travelling `distance` along the centerline from y0.
double advance(const SceneSpec& spec, double y0, double distance) {
  double y = y0 + distance / centerline_tangent(spec, y0).norm();
  for (int it = 0; it < 50; ++it) {
    const double step = (arclength(spec, y0, y) - distance) / centerline_tangent(spec, y).norm();
    y -= step;
    if (std::abs(step) < 1e-13) break;
  }
  return y;
}

Eigen::Vector3d right_axis(const SceneSpec& spec, double y) {
  const Eigen::Vector3d t = centerline_tangent(spec, y);
  return Eigen::Vector3d(t.y(), -t.x(), 0.0).normalized();
}

EgoPose pose_at(const SceneSpec& spec, double y) {
  const Eigen::Vector3d forward = centerline_tangent(spec, y).normalized();
  const Eigen::Vector3d right = right_axis(spec, y);
  Eigen::Matrix3d r;
  r.col(0) = right;
  r.col(1) = forward;
  r.col(2) = right.cross(forward);
  return EgoPose(r, centerline_point(spec, y));
}

// Ego-frame copy of a world polyline resampled every `step` metres of y in
// [0, range]; rows where the polyline does not reach are omitted.
Eigen::MatrixX4d ego_samples(const Eigen::MatrixX4d& world, const EgoPose& world_to_ego, double range,
                             double step) {
  const Eigen::MatrixX4d local = transform_points(world, world_to_ego);
  const int count = static_cast<int>(std::floor(range / step + 1e-9)) + 1;
  std::vector<Eigen::RowVector4d> rows;
  for (int g = 0; g < count; ++g) {
    const double y = g * step;
    for (Eigen::Index i = 0; i + 1 < local.rows(); ++i) {
      const double y0 = local(i, 1), y1 = local(i + 1, 1);
      if (y0 == y1 || y < std::min(y0, y1) || y > std::max(y0, y1)) continue;
      const double w = (y - y0) / (y1 - y0);
      const Eigen::RowVector4d p = (1 - w) * local.row(i) + w * local.row(i + 1);
      rows.emplace_back(p(0), y, p(2), p(3));
      break;
    }
  }
  Eigen::MatrixX4d out(static_cast<Eigen::Index>(rows.size()), 4);
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(Eigen::Index(i)) = rows[i];
  return out;
}

}  // namespace

World gen_scene(const SceneSpec& spec) {
  spec.validate();
  World world;
  world.spec = spec;

  double y = 0.0;
  const double step_distance = spec.speed * spec.dt;
  for (int k = 0; k < spec.frames; ++k) {
    if (k > 0) y = advance(spec, y, step_distance);
    world.trajectory.push_back({k * spec.dt, pose_at(spec, y)});
  }

  const double y_end = y + spec.lookahead;
  const int samples = static_cast<int>(std::floor(y_end / spec.sample_step + 1e-9)) + 1;
  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> category(0, spec.num_categories - 1);
  for (int l = 0; l < spec.num_lanes; ++l) {
    const double offset = (l - 0.5 * (spec.num_lanes - 1)) * spec.lane_spacing;
    Lane lane;
    lane.id = l;
    lane.category = category(rng);
    lane.points.resize(samples, 4);
    for (int i = 0; i < samples; ++i) {
      const double yc = i * spec.sample_step;
      const Eigen::Vector3d p = centerline_point(spec, yc) + offset * right_axis(spec, yc);
      lane.points.row(i) << p.x(), p.y(), p.z(), 1.0;
    }
    world.lanes.push_back(std::move(lane));
  }
  return world;
}

std::vector<LaneFrame> ground_truth_frames(const World& world, const CameraModel& camera,
                                           double range, double step) {
  if (!(range > 0.0) || !(step > 0.0)) throw std::invalid_argument("range and step must be positive");
  std::vector<LaneFrame> frames;
  frames.reserve(world.trajectory.size());
  for (std::size_t k = 0; k < world.trajectory.size(); ++k) {
    LaneFrame frame;
    frame.frame_id = static_cast<int>(k);
    frame.timestamp_s = world.trajectory[k].timestamp_s;
    frame.ego_pose = world.trajectory[k].pose;
    frame.camera = camera;
    const EgoPose world_to_ego = frame.ego_pose.inverse();
    for (const auto& lane : world.lanes) {
      Lane local{lane.id, lane.category, ego_samples(lane.points, world_to_ego, range, step)};
      if (local.points.rows() >= 2) frame.lanes.push_back(std::move(local));
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::vector<Detection2D> render_2d(const World& world, int frame, const CameraModel& camera,
                                   double pixel_noise_sigma, std::mt19937_64& rng, double max_range) {
  camera.validate();
  if (frame < 0 || frame >= static_cast<int>(world.trajectory.size())) {
    throw std::out_of_range("frame index outside the trajectory");
  }
  const EgoPose world_to_ego = world.trajectory[frame].pose.inverse();
  const EgoPose ego_to_camera = camera.extrinsic.inverse();
  std::normal_distribution<double> noise(0.0, pixel_noise_sigma > 0.0 ? pixel_noise_sigma : 1.0);
  std::vector<Detection2D> out;
  for (const auto& lane : world.lanes) {
    std::vector<Eigen::Vector2d> pixels;
    for (Eigen::Index i = 0; i < lane.points.rows(); ++i) {
      const Eigen::Vector3d ego = world_to_ego.apply(lane.points.row(i).head<3>().transpose());
      if (ego.y() <= 0.0 || ego.y() > max_range) continue;
      const auto pixel = camera.project(ego_to_camera.apply(ego));
      if (!pixel || !camera.in_image(*pixel)) continue;
      Eigen::Vector2d p = *pixel;
      if (pixel_noise_sigma > 0.0) {
        p.x() += noise(rng);
        p.y() += noise(rng);
        if (!camera.in_image(p)) continue;
      }
      pixels.push_back(p);
    }
    if (pixels.empty()) continue;
    Detection2D det;
    det.category = lane.category;
    det.pixels.resize(static_cast<Eigen::Index>(pixels.size()), 2);
    for (std::size_t i = 0; i < pixels.size(); ++i) det.pixels.row(Eigen::Index(i)) = pixels[i].transpose();
    out.push_back(std::move(det));
  }
  return out;
}

std::vector<std::vector<Detection2D>> render_sequence(const World& world, const CameraModel& camera,
                                                      double pixel_noise_sigma, std::uint64_t seed,
                                                      double max_range) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<Detection2D>> out;
  out.reserve(world.trajectory.size());
  for (std::size_t k = 0; k < world.trajectory.size(); ++k) {
    out.push_back(render_2d(world, static_cast<int>(k), camera, pixel_noise_sigma, rng, max_range));
  }
  return out;
}

void Obstacle::validate() const {
  if (!((max - min).array() > 0.0).all()) throw std::invalid_argument("obstacle extents must be positive");
}

bool segment_intersects_box(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Obstacle& box) {
  const Eigen::Vector3d d = b - a;
  double t0 = 0.0, t1 = 1.0;
  for (int axis = 0; axis < 3; ++axis) {
    if (std::abs(d[axis]) < 1e-15) {
      if (a[axis] < box.min[axis] || a[axis] > box.max[axis]) return false;
      continue;
    }
    double lo = (box.min[axis] - a[axis]) / d[axis];
    double hi = (box.max[axis] - a[axis]) / d[axis];
    if (lo > hi) std::swap(lo, hi);
    t0 = std::max(t0, lo);
    t1 = std::min(t1, hi);
    if (t0 > t1) return false;
  }
  return true;
}

std::vector<char> occlusion_flags(const Eigen::Ref<const Eigen::MatrixX4d>& points,
                                  const Eigen::Vector3d& eye, const std::vector<Obstacle>& obstacles) {
  for (const auto& box : obstacles) box.validate();
  std::vector<char> visible(static_cast<std::size_t>(points.rows()), 1);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const Eigen::Vector3d p = points.row(i).head<3>().transpose();
    for (const auto& box : obstacles) {
      if (segment_intersects_box(eye, p, box)) {
        visible[i] = 0;
        break;
      }
    }
  }
  return visible;
}

std::vector<LaneFrame> simulate_occlusion(const std::vector<LaneFrame>& frames,
                                          const std::vector<std::vector<Obstacle>>& obstacles) {
  if (obstacles.size() != frames.size()) throw std::invalid_argument("one obstacle list per frame required");
  std::vector<LaneFrame> out = frames;
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (obstacles[k].empty()) continue;
    const Eigen::Vector3d eye = out[k].camera.extrinsic.translation();
    for (auto& lane : out[k].lanes) {
      const std::vector<char> visible = occlusion_flags(lane.points, eye, obstacles[k]);
      for (Eigen::Index i = 0; i < lane.points.rows(); ++i) {
        if (!visible[i]) lane.points(i, 3) = 0.0;
      }
    }
  }
  return out;
}

}  // namespace lanestp
