#include "lanestp/autolabel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lanestp/assignment.hpp"

namespace lanestp {

void validate_trajectory(const Trajectory& trajectory) {
  if (trajectory.size() < 2) throw std::invalid_argument("trajectory needs at least 2 poses");
  for (std::size_t k = 1; k < trajectory.size(); ++k) {
    if (!(trajectory[k].timestamp_s > trajectory[k - 1].timestamp_s)) {
      throw std::invalid_argument("trajectory timestamps must be strictly increasing");
    }
    if ((trajectory[k].pose.translation() - trajectory[k - 1].pose.translation()).norm() < 1e-9) {
      throw std::invalid_argument("duplicate consecutive trajectory positions at index " +
                                  std::to_string(k));
    }
  }
}

double SurfaceSegment::interval_violation(const Eigen::Vector3d& p) const {
  const double lambda = chord_fraction(p);
  double v = 0.0;
  if (!open_start && lambda < 0.0) v = -lambda;
  if (!open_end && lambda > 1.0) v = lambda - 1.0;
  return v * length;
}

SurfaceModel::SurfaceModel(std::vector<SurfaceSegment> segments) : segments_(std::move(segments)) {}

double SurfaceModel::total_length() const {
  if (segments_.empty()) return 0.0;
  return segments_.back().start_arclength + segments_.back().length;
}

SurfaceModel build_surface(const Trajectory& trajectory) {
  validate_trajectory(trajectory);
  std::vector<SurfaceSegment> segments;
  segments.reserve(trajectory.size() - 1);
  double arclength = 0.0;
  for (std::size_t k = 0; k + 1 < trajectory.size(); ++k) {
    SurfaceSegment seg;
    seg.origin = trajectory[k].pose.translation();
    seg.chord = trajectory[k + 1].pose.translation() - seg.origin;
    seg.length = seg.chord.norm();
    seg.forward = seg.chord / seg.length;
    const Eigen::Vector3d side = trajectory[k].pose.rotation().col(0);
    const Eigen::Vector3d lateral = side - side.dot(seg.forward) * seg.forward;
    if (lateral.norm() < 1e-6) {
      throw std::invalid_argument("vehicle lateral axis is parallel to the direction of travel");
    }
    seg.lateral = lateral.normalized();
    seg.normal = seg.lateral.cross(seg.forward);
    seg.start_arclength = arclength;
    seg.open_start = k == 0;
    seg.open_end = k + 2 == trajectory.size();
    arclength += seg.length;
    segments.push_back(seg);
  }
  return SurfaceModel(std::move(segments));
}

int SurfaceModel::segment_for(const Eigen::Vector3d& p) const {
  if (segments_.empty()) throw std::logic_error("empty surface model");
  int best = 0;
  double best_violation = std::numeric_limits<double>::infinity();
  double best_residual = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < segments_.size(); ++k) {
    const double v = segments_[k].interval_violation(p);
    const double r = std::abs(segments_[k].plane_residual(p));
    if (v < best_violation - 1e-12 || (std::abs(v - best_violation) <= 1e-12 && r < best_residual)) {
      best = static_cast<int>(k);
      best_violation = v;
      best_residual = r;
    }
  }
  return best;
}

StationCoord SurfaceModel::to_station(const Eigen::Vector3d& p) const {
  const int k = segment_for(p);
  const SurfaceSegment& seg = segments_[k];
  const double lambda = seg.chord_fraction(p);
  const Eigen::Vector3d rel = p - (seg.origin + lambda * seg.chord);
  return {seg.start_arclength + lambda * seg.length, rel.dot(seg.lateral), rel.dot(seg.normal), k};
}

Eigen::Vector3d SurfaceModel::from_station(double arclength, double lateral, double height) const {
  if (segments_.empty()) throw std::logic_error("empty surface model");
  auto it = std::upper_bound(segments_.begin(), segments_.end(), arclength,
                             [](double a, const SurfaceSegment& s) { return a < s.start_arclength; });
  const SurfaceSegment& seg = it == segments_.begin() ? segments_.front() : *std::prev(it);
  return seg.origin + (arclength - seg.start_arclength) * seg.forward + lateral * seg.lateral +
         height * seg.normal;
}

std::optional<RayHit> intersect_ray(const Eigen::Vector3d& origin, const Eigen::Vector3d& direction,
                                    const SurfaceModel& surface) {
  // Hits just outside every interval (wedges on the outside of turns) fall
  // back to the least-violating segment within this distance.
  constexpr double kFallbackTolerance = 0.5;
  const Eigen::Vector3d dir = direction.normalized();
  std::optional<RayHit> valid, fallback;
  double fallback_violation = kFallbackTolerance;
  const auto& segments = surface.segments();
  for (std::size_t k = 0; k < segments.size(); ++k) {
    const SurfaceSegment& seg = segments[k];
    const double denom = seg.normal.dot(dir);
    if (std::abs(denom) < 1e-12) continue;
    const double t = seg.normal.dot(seg.origin - origin) / denom;
    if (t <= 1e-9) continue;
    const Eigen::Vector3d point = origin + t * dir;
    const double violation = seg.interval_violation(point);
    if (violation == 0.0) {
      if (!valid || t < valid->distance) valid = RayHit{point, static_cast<int>(k), t};
    } else if (violation < fallback_violation) {
      fallback_violation = violation;
      fallback = RayHit{point, static_cast<int>(k), t};
    }
  }
  return valid ? valid : fallback;
}

std::optional<RayHit> ray_surface_intersect(const CameraModel& camera, const Eigen::Vector2d& pixel,
                                            const EgoPose& pose, const SurfaceModel& surface) {
  if (!camera.in_image(pixel)) throw std::domain_error("pixel outside the image bounds");
  const EgoPose camera_to_world = pose * camera.extrinsic;
  return intersect_ray(camera_to_world.translation(),
                       camera_to_world.rotation() * camera.back_project(pixel), surface);
}

std::vector<LiftedLine> lift_detections(const std::vector<Detection2D>& detections,
                                        const CameraModel& camera, const EgoPose& pose,
                                        const SurfaceModel& surface, double near_range) {
  std::vector<LiftedLine> lines;
  lines.reserve(detections.size());
  const EgoPose world_to_vehicle = pose.inverse();
  for (const auto& det : detections) {
    std::vector<Eigen::Vector3d> kept;
    for (Eigen::Index i = 0; i < det.pixels.rows(); ++i) {
      const Eigen::Vector2d pixel = det.pixels.row(i).transpose();
      if (!camera.in_image(pixel)) continue;
      const auto hit = ray_surface_intersect(camera, pixel, pose, surface);
      if (!hit) continue;
      const double ahead = world_to_vehicle.apply(hit->point).y();
      if (ahead < 0.0 || ahead > near_range) continue;
      kept.push_back(hit->point);
    }
    LiftedLine line;
    line.category = det.category;
    line.points.resize(static_cast<Eigen::Index>(kept.size()), 3);
    for (std::size_t i = 0; i < kept.size(); ++i) line.points.row(Eigen::Index(i)) = kept[i].transpose();
    lines.push_back(std::move(line));
  }
  return lines;
}

int Track::category() const {
  int best = 0, votes = -1;
  for (const auto& [cat, count] : category_votes) {
    if (count > votes) {
      best = cat;
      votes = count;
    }
  }
  return best;
}

Eigen::MatrixX3d Track::global_polyline(const SurfaceModel& surface, double station_spacing) const {
  Eigen::MatrixX3d out(static_cast<Eigen::Index>(stations.size()), 3);
  Eigen::Index r = 0;
  for (const auto& [index, state] : stations) {
    out.row(r++) = surface.from_station(index * station_spacing, state.mean[0], state.mean[1]).transpose();
  }
  return out;
}

std::map<int, Eigen::Vector2d> station_measurements(const LiftedLine& line,
                                                    const SurfaceModel& surface,
                                                    double station_spacing) {
  // Points further apart than this along the trajectory are not bridged.
  constexpr double kMaxBridge = 5.0;
  // The surface is only known along the driven stretch.
  const double max_arclength = surface.total_length() + 1e-9;
  std::map<int, Eigen::Vector2d> out;
  std::vector<StationCoord> coords;
  coords.reserve(line.points.rows());
  for (Eigen::Index i = 0; i < line.points.rows(); ++i) {
    coords.push_back(surface.to_station(line.points.row(i).transpose()));
  }
  std::sort(coords.begin(), coords.end(),
            [](const StationCoord& a, const StationCoord& b) { return a.arclength < b.arclength; });
  if (coords.size() == 1) {
    const int s = static_cast<int>(std::lround(coords[0].arclength / station_spacing));
    if (s >= 0 && s * station_spacing <= max_arclength && std::abs(s * station_spacing - coords[0].arclength) <= 0.5 * station_spacing) {
      out[s] = {coords[0].lateral, coords[0].height};
    }
    return out;
  }
  for (std::size_t i = 0; i + 1 < coords.size(); ++i) {
    const StationCoord& a = coords[i];
    const StationCoord& b = coords[i + 1];
    const double span = b.arclength - a.arclength;
    if (span > kMaxBridge) continue;
    const int first = static_cast<int>(std::ceil(a.arclength / station_spacing - 1e-12));
    const int last = static_cast<int>(std::floor(b.arclength / station_spacing + 1e-12));
    for (int s = first; s <= last; ++s) {
      if (s < 0 || s * station_spacing > max_arclength) continue;
      const double w = span > 0.0 ? std::clamp((s * station_spacing - a.arclength) / span, 0.0, 1.0) : 0.0;
      out[s] = {(1 - w) * a.lateral + w * b.lateral, (1 - w) * a.height + w * b.height};
    }
  }
  return out;
}

LineTracker::LineTracker(SurfaceModel surface, TrackerConfig cfg)
    : surface_(std::move(surface)), cfg_(cfg) {
  if (!(cfg_.gate > 0.0) || !(cfg_.station_spacing > 0.0) || cfg_.confirm_after < 1 ||
      !(cfg_.measurement_sigma > 0.0) || cfg_.process_sigma < 0.0) {
    throw std::invalid_argument("invalid tracker configuration");
  }
}

void LineTracker::update_station(StationState& state, const Eigen::Vector2d& z) const {
  const Eigen::Matrix2d r = Eigen::Matrix2d::Identity() * cfg_.measurement_sigma * cfg_.measurement_sigma;
  if (state.updates == 0) {
    state.mean = z;
    state.covariance = r;
    state.updates = 1;
    return;
  }
  state.covariance += Eigen::Matrix2d::Identity() * cfg_.process_sigma * cfg_.process_sigma;
  const Eigen::Matrix2d gain = state.covariance * (state.covariance + r).inverse();
  state.mean += gain * (z - state.mean);
  state.covariance = (Eigen::Matrix2d::Identity() - gain) * state.covariance;
  state.covariance = 0.5 * (state.covariance + state.covariance.transpose()).eval();
  ++state.updates;
}

namespace {

// Mean lateral disagreement between a measurement set and a track.
double association_cost(const std::map<int, Eigen::Vector2d>& meas, const Track& track) {
  constexpr int kMaxStationGap = 5;
  double sum = 0.0;
  int count = 0;
  for (const auto& [s, z] : meas) {
    if (auto it = track.stations.find(s); it != track.stations.end()) {
      sum += std::abs(z[0] - it->second.mean[0]);
      ++count;
    }
  }
  if (count > 0) return sum / count;
  // No overlap: compare the closest pair of stations.
  int best_gap = std::numeric_limits<int>::max();
  double best_cost = std::numeric_limits<double>::infinity();
  for (const auto& [s, z] : meas) {
    auto it = track.stations.lower_bound(s);
    for (auto cand : {it, it == track.stations.begin() ? it : std::prev(it)}) {
      if (cand == track.stations.end()) continue;
      const int gap = std::abs(cand->first - s);
      if (gap < best_gap) {
        best_gap = gap;
        best_cost = std::abs(z[0] - cand->second.mean[0]);
      }
    }
  }
  return best_gap <= kMaxStationGap ? best_cost : std::numeric_limits<double>::infinity();
}

}  // namespace

std::vector<int> LineTracker::step(const std::vector<LiftedLine>& lines, int frame_index) {
  std::vector<std::map<int, Eigen::Vector2d>> meas;
  meas.reserve(lines.size());
  for (const auto& line : lines) meas.push_back(station_measurements(line, surface_, cfg_.station_spacing));

  std::vector<int> assigned(lines.size(), -1);
  std::vector<char> track_hit(tracks_.size(), 0);

  const double big = 1e9;
  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(lines.size(), tracks_.size(), big);
  for (std::size_t l = 0; l < lines.size(); ++l) {
    if (meas[l].empty()) continue;
    for (std::size_t t = 0; t < tracks_.size(); ++t) {
      const double c = association_cost(meas[l], tracks_[t]);
      if (c <= cfg_.gate) cost(Eigen::Index(l), Eigen::Index(t)) = c;
    }
  }
  if (!lines.empty() && !tracks_.empty()) {
    const Assignment a = solve_assignment(cost);
    for (std::size_t l = 0; l < lines.size(); ++l) {
      const int t = a.row_to_col[l];
      if (t < 0 || cost(Eigen::Index(l), t) >= big) continue;
      Track& track = tracks_[t];
      for (const auto& [s, z] : meas[l]) update_station(track.stations[s], z);
      ++track.category_votes[lines[l].category];
      track.consecutive_hits = track.last_frame == frame_index - 1 ? track.consecutive_hits + 1 : 1;
      track.last_frame = frame_index;
      if (track.consecutive_hits >= cfg_.confirm_after) track.confirmed = true;
      track_hit[t] = 1;
      assigned[l] = track.id;
    }
  }

  // Tentative tracks missed this frame are dropped.
  std::vector<Track> kept;
  kept.reserve(tracks_.size() + lines.size());
  for (std::size_t t = 0; t < tracks_.size(); ++t) {
    if (tracks_[t].confirmed || track_hit[t]) kept.push_back(std::move(tracks_[t]));
  }
  tracks_ = std::move(kept);

  for (std::size_t l = 0; l < lines.size(); ++l) {
    if (assigned[l] >= 0 || meas[l].empty()) continue;
    Track track;
    track.id = next_id_++;
    for (const auto& [s, z] : meas[l]) update_station(track.stations[s], z);
    ++track.category_votes[lines[l].category];
    track.consecutive_hits = 1;
    track.last_frame = frame_index;
    track.confirmed = cfg_.confirm_after <= 1;
    assigned[l] = track.id;
    tracks_.push_back(std::move(track));
  }
  return assigned;
}

std::vector<Track> LineTracker::confirmed_tracks() const {
  std::vector<Track> out;
  for (const auto& t : tracks_) {
    if (t.confirmed) out.push_back(t);
  }
  return out;
}

LaneFrame emit_frame_labels(const std::vector<Track>& tracks, const SurfaceModel& surface,
                            double station_spacing, const EgoPose& pose, double range, double step) {
  if (!(range > 0.0) || !(step > 0.0)) throw std::invalid_argument("label range and step must be positive");
  LaneFrame frame;
  frame.ego_pose = pose;
  const EgoPose world_to_vehicle = pose.inverse();
  const int count = static_cast<int>(std::floor(range / step + 1e-9)) + 1;
  for (const auto& track : tracks) {
    const Eigen::MatrixX3d world = track.global_polyline(surface, station_spacing);
    if (world.rows() < 2) continue;
    Eigen::MatrixX3d local(world.rows(), 3);
    for (Eigen::Index i = 0; i < world.rows(); ++i) {
      local.row(i) = world_to_vehicle.apply(world.row(i).transpose()).transpose();
    }
    std::vector<Eigen::RowVector4d> rows;
    for (int g = 0; g < count; ++g) {
      const double y = g * step;
      for (Eigen::Index i = 0; i + 1 < local.rows(); ++i) {
        const double y0 = local(i, 1), y1 = local(i + 1, 1);
        if (y0 == y1 || y < std::min(y0, y1) || y > std::max(y0, y1)) continue;
        const double w = (y - y0) / (y1 - y0);
        const Eigen::RowVector3d p = (1 - w) * local.row(i) + w * local.row(i + 1);
        rows.emplace_back(p.x(), y, p.z(), 1.0);
        break;
      }
    }
    if (rows.size() < 2) continue;
    Lane lane;
    lane.id = track.id;
    lane.category = track.category();
    lane.points.resize(static_cast<Eigen::Index>(rows.size()), 4);
    for (std::size_t i = 0; i < rows.size(); ++i) lane.points.row(Eigen::Index(i)) = rows[i];
    frame.lanes.push_back(std::move(lane));
  }
  return frame;
}

std::vector<LaneFrame> autolabel_sequence(const Trajectory& trajectory, const CameraModel& camera,
                                          const std::vector<std::vector<Detection2D>>& detections,
                                          const AutolabelConfig& cfg) {
  if (detections.size() != trajectory.size()) {
    throw std::invalid_argument("one detection set per trajectory pose required");
  }
  camera.validate();
  LineTracker tracker(build_surface(trajectory), cfg.tracker);
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    tracker.step(lift_detections(detections[k], camera, trajectory[k].pose, tracker.surface(),
                                 cfg.near_range),
                 static_cast<int>(k));
  }
  const std::vector<Track> confirmed = tracker.confirmed_tracks();
  std::vector<LaneFrame> frames;
  frames.reserve(trajectory.size());
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    LaneFrame frame = emit_frame_labels(confirmed, tracker.surface(), cfg.tracker.station_spacing,
                                        trajectory[k].pose, cfg.label_range, cfg.label_step);
    frame.frame_id = static_cast<int>(k);
    frame.timestamp_s = trajectory[k].timestamp_s;
    frame.camera = camera;
    frames.push_back(std::move(frame));
  }
  return frames;
}

}  // namespace lanestp
