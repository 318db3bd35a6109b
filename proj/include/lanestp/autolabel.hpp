#pragma once

#include <map>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "lanestp/frame.hpp"
#include "lanestp/pose.hpp"

namespace lanestp {

struct TimedPose {
  double timestamp_s = 0.0;
  EgoPose pose;
};

using Trajectory = std::vector<TimedPose>;

/// Strictly increasing timestamps, at least two poses, distinct consecutive positions.
void validate_trajectory(const Trajectory& trajectory);

/// Plane spanned by the chord between two consecutive trajectory positions and
/// the lateral axis of the first pose. The frame (forward, lateral, normal) is
/// orthonormal and right-handed with lateral x forward = normal.
struct SurfaceSegment {
  Eigen::Vector3d origin;
  Eigen::Vector3d chord;
  Eigen::Vector3d forward;
  Eigen::Vector3d lateral;
  Eigen::Vector3d normal;
  double start_arclength = 0.0;
  double length = 0.0;
  bool open_start = false;  // first segment extends backwards
  bool open_end = false;    // last segment extends forwards

  /// Position along the chord as a fraction of its length.
  double chord_fraction(const Eigen::Vector3d& p) const {
    return (p - origin).dot(chord) / chord.squaredNorm();
  }
  /// Distance outside the validity interval along the chord, in metres.
  double interval_violation(const Eigen::Vector3d& p) const;
  double plane_residual(const Eigen::Vector3d& p) const { return normal.dot(p - origin); }
};

/// Station coordinates relative to the trajectory: arclength along the chain
/// of chords, lateral offset and height above the segment plane.
struct StationCoord {
  double arclength = 0.0;
  double lateral = 0.0;
  double height = 0.0;
  int segment = 0;
};

/// First-degree spline surface: one plane per consecutive pose pair.
class SurfaceModel {
 public:
  SurfaceModel() = default;
  explicit SurfaceModel(std::vector<SurfaceSegment> segments);

  const std::vector<SurfaceSegment>& segments() const { return segments_; }
  double total_length() const;

  /// Segment whose validity interval contains p (closest one otherwise).
  int segment_for(const Eigen::Vector3d& p) const;
  StationCoord to_station(const Eigen::Vector3d& p) const;
  Eigen::Vector3d from_station(double arclength, double lateral, double height = 0.0) const;

 private:
  std::vector<SurfaceSegment> segments_;
};

SurfaceModel build_surface(const Trajectory& trajectory);

struct RayHit {
  Eigen::Vector3d point;
  int segment = -1;
  double distance = 0.0;  // along the ray
};

/// Nearest intersection of a world-frame ray with the surface that lies in its
/// segment's validity interval. Rays parallel to a plane skip that plane.
std::optional<RayHit> intersect_ray(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction,
                                    const SurfaceModel& surface);

/// Ray through `pixel` of a camera on a vehicle at `pose`.
std::optional<RayHit> ray_surface_intersect(const CameraModel& camera, const Eigen::Vector2d& pixel,
                                            const EgoPose& pose, const SurfaceModel& surface);

/// 2D detector output for one line, pixels ordered bottom to top.
struct Detection2D {
  int category = 0;
  Eigen::MatrixX2d pixels;
};

struct LiftedLine {
  int category = 0;
  Eigen::MatrixX3d points;  // world frame
};

/// Lifts each detection onto the surface and keeps points no further than
/// `near_range` metres ahead of the vehicle. Lines with no surviving point are
/// returned empty.
std::vector<LiftedLine> lift_detections(const std::vector<Detection2D>& detections,
                                        const CameraModel& camera, const EgoPose& pose,
                                        const SurfaceModel& surface, double near_range = 25.0);

struct TrackerConfig {
  double gate = 1.0;              // m, mean lateral difference
  double station_spacing = 2.0;   // m along the trajectory
  int confirm_after = 3;          // consecutive observations
  double measurement_sigma = 0.1; // m
  double process_sigma = 0.0;     // m per frame, static lanes
};

/// Kalman state of one station: (lateral offset, height) and its covariance.
struct StationState {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Identity();
  int updates = 0;
};

struct Track {
  int id = 0;
  std::map<int, StationState> stations;  // station index -> state
  std::map<int, int> category_votes;
  int consecutive_hits = 0;
  int last_frame = -1;
  bool confirmed = false;

  /// Majority category, ties to the lower category.
  int category() const;
  /// World polyline through the station states, ordered by arclength.
  Eigen::MatrixX3d global_polyline(const SurfaceModel& surface, double station_spacing) const;
};

/// Station measurements of one lifted line: station index -> (lateral, height).
/// Only stations within the driven arclength [0, total_length] are produced.
std::map<int, Eigen::Vector2d> station_measurements(const LiftedLine& line,
                                                    const SurfaceModel& surface,
                                                    double station_spacing);

/// Associates lifted lines to tracks inside the lateral gate, updates the
/// per-station Kalman filters and spawns tentative tracks for the rest.
/// Tentative tracks are confirmed after `confirm_after` consecutive frames and
/// dropped when missed before that.
class LineTracker {
 public:
  LineTracker(SurfaceModel surface, TrackerConfig cfg = {});

  /// Returns the track id assigned to each input line (-1 for empty lines).
  std::vector<int> step(const std::vector<LiftedLine>& lines, int frame_index);

  const std::vector<Track>& tracks() const { return tracks_; }
  std::vector<Track> confirmed_tracks() const;
  const SurfaceModel& surface() const { return surface_; }
  const TrackerConfig& config() const { return cfg_; }

 private:
  void update_station(StationState& state, const Eigen::Vector2d& z) const;

  SurfaceModel surface_;
  TrackerConfig cfg_;
  std::vector<Track> tracks_;
  int next_id_ = 0;
};

/// Global track polylines expressed in the ego frame of `pose`, clipped to
/// y in [0, range] and resampled every `step` metres of y.
LaneFrame emit_frame_labels(const std::vector<Track>& tracks, const SurfaceModel& surface,
                            double station_spacing, const EgoPose& pose, double range = 250.0,
                            double step = 2.0);

struct AutolabelConfig {
  double near_range = 25.0;
  double label_range = 250.0;
  double label_step = 2.0;
  TrackerConfig tracker;
};

/// Whole pipeline: surface from the trajectory, lifting and tracking over all
/// frames, then per-frame labels. detections[k] belongs to trajectory[k].
std::vector<LaneFrame> autolabel_sequence(const Trajectory& trajectory, const CameraModel& camera,
                                          const std::vector<std::vector<Detection2D>>& detections,
                                          const AutolabelConfig& cfg = {});

}  // namespace lanestp
