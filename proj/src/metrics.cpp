#include "lanestp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "lanestp/assignment.hpp"
#include "lanestp/spline.hpp"

namespace lanestp {

void MatchConfig::validate() const {
  if (!(point_threshold > 0.0)) throw std::invalid_argument("point threshold must be positive");
  if (!(match_fraction > 0.0 && match_fraction <= 1.0)) {
    throw std::invalid_argument("lane match fraction must lie in (0, 1]");
  }
  if (!(y_max > y_min) || !(y_step > 0.0)) throw std::invalid_argument("invalid evaluation y grid");
  if (bin_edges.size() < 2 || !std::is_sorted(bin_edges.begin(), bin_edges.end())) {
    throw std::invalid_argument("error bins need at least two ascending edges");
  }
  if (!(chamfer_threshold > 0.0)) throw std::invalid_argument("chamfer threshold must be positive");
}

Eigen::VectorXd MatchConfig::y_grid() const {
  const auto count = static_cast<Eigen::Index>(std::floor((y_max - y_min) / y_step + 1e-9)) + 1;
  Eigen::VectorXd grid(count);
  for (Eigen::Index i = 0; i < count; ++i) grid[i] = y_min + static_cast<double>(i) * y_step;
  return grid;
}

GridLane resample_lane(const Eigen::MatrixX4d& points, const Eigen::VectorXd& y_grid,
                       double visibility_threshold) {
  GridLane out;
  const Eigen::Index g = y_grid.size();
  out.x.setZero(g);
  out.z.setZero(g);
  out.v.setZero(g);
  out.present.assign(g, 0);
  out.visible.assign(g, 0);
  if (points.rows() == 0) return out;

  Eigen::MatrixX4d sorted = points;
  std::vector<Eigen::Index> order(points.rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return points(a, kY) < points(b, kY); });
  for (std::size_t i = 0; i < order.size(); ++i) sorted.row(Eigen::Index(i)) = points.row(order[i]);

  const Eigen::Index n = sorted.rows();
  const double lo = sorted(0, kY), hi = sorted(n - 1, kY);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < g; ++i) {
    const double y = y_grid[i];
    if (y < lo - 1e-9 || y > hi + 1e-9) continue;
    if (n == 1) {
      out.x[i] = sorted(0, kX);
      out.z[i] = sorted(0, kZ);
      out.v[i] = sorted(0, kV);
    } else {
      while (k + 2 < n && sorted(k + 1, kY) < y) ++k;
      const double y0 = sorted(k, kY), y1 = sorted(k + 1, kY);
      const double w = y1 > y0 ? std::clamp((y - y0) / (y1 - y0), 0.0, 1.0) : 0.0;
      out.x[i] = (1 - w) * sorted(k, kX) + w * sorted(k + 1, kX);
      out.z[i] = (1 - w) * sorted(k, kZ) + w * sorted(k + 1, kZ);
      out.v[i] = (1 - w) * sorted(k, kV) + w * sorted(k + 1, kV);
    }
    out.present[i] = 1;
    out.visible[i] = out.v[i] >= visibility_threshold ? 1 : 0;
  }
  return out;
}

namespace {

struct PairStats {
  int covisible = 0;
  int matched = 0;
  double distance_sum = 0.0;
};

PairStats pair_stats(const GridLane& pred, const GridLane& gt, double threshold) {
  PairStats s;
  for (std::size_t i = 0; i < gt.visible.size(); ++i) {
    if (!gt.visible[i] || !pred.visible[i]) continue;
    const Eigen::Index k = static_cast<Eigen::Index>(i);
    const double d = std::hypot(pred.x[k] - gt.x[k], pred.z[k] - gt.z[k]);
    ++s.covisible;
    s.distance_sum += d;
    if (d < threshold) ++s.matched;
  }
  return s;
}

std::size_t bin_of(double y, const std::vector<double>& edges) {
  if (y < edges.front() || y > edges.back()) return edges.size();
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
    if (y < edges[b + 1]) return b;
  }
  return edges.size() - 2;  // upper edge belongs to the last bin
}

}  // namespace

FrameMatch match_lanes(const std::vector<Lane>& pred, const std::vector<Lane>& gt,
                       const MatchConfig& cfg) {
  cfg.validate();
  FrameMatch match;
  match.y_grid = cfg.y_grid();
  for (const auto& lane : pred) {
    match.pred_grid.push_back(resample_lane(lane.points, match.y_grid, cfg.visibility_threshold));
  }
  for (const auto& lane : gt) {
    match.gt_grid.push_back(resample_lane(lane.points, match.y_grid, cfg.visibility_threshold));
  }

  const Eigen::Index np = static_cast<Eigen::Index>(pred.size());
  const Eigen::Index ng = static_cast<Eigen::Index>(gt.size());
  // Inadmissible pairs cost more than any full set of admissible ones, so the
  // optimum maximises the number of admissible pairs first.
  const double big = 1e6 * (1.0 + cfg.point_threshold) * static_cast<double>(std::max<Eigen::Index>(1, np + ng));
  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(np, ng, big);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> admissible =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(np, ng, false);
  for (Eigen::Index p = 0; p < np; ++p) {
    for (Eigen::Index g = 0; g < ng; ++g) {
      const PairStats s = pair_stats(match.pred_grid[p], match.gt_grid[g], cfg.point_threshold);
      if (s.covisible == 0) continue;
      if (static_cast<double>(s.matched) + 1e-9 < cfg.match_fraction * s.covisible) continue;
      admissible(p, g) = true;
      cost(p, g) = s.distance_sum / s.covisible;
    }
  }

  std::vector<char> gt_used(ng, 0);
  if (np > 0 && ng > 0) {
    const Assignment a = solve_assignment(cost);
    for (Eigen::Index p = 0; p < np; ++p) {
      const int g = a.row_to_col[p];
      if (g >= 0 && admissible(p, g)) {
        match.pairs.emplace_back(static_cast<int>(p), g);
        gt_used[g] = 1;
      } else {
        match.unmatched_pred.push_back(static_cast<int>(p));
      }
    }
  } else {
    for (Eigen::Index p = 0; p < np; ++p) match.unmatched_pred.push_back(static_cast<int>(p));
  }
  for (Eigen::Index g = 0; g < ng; ++g) {
    if (!gt_used[g]) match.unmatched_gt.push_back(static_cast<int>(g));
  }
  return match;
}

F1Score f1_from_counts(long tp, long fp, long fn) {
  F1Score s;
  s.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  s.f1 = (s.precision + s.recall) > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

F1Score f1_score(const FrameMatch& match) {
  return f1_from_counts(match.true_positives(), match.false_positives(), match.false_negatives());
}

void BinErrors::add(const BinErrors& other) {
  if (other.count.size() != count.size()) throw std::invalid_argument("bin layouts differ");
  for (std::size_t b = 0; b < count.size(); ++b) {
    sum_x[b] += other.sum_x[b];
    sum_z[b] += other.sum_z[b];
    count[b] += other.count[b];
  }
}

std::optional<double> BinErrors::mean_x(std::size_t bin) const {
  if (count.at(bin) == 0) return std::nullopt;
  return sum_x[bin] / static_cast<double>(count[bin]);
}

std::optional<double> BinErrors::mean_z(std::size_t bin) const {
  if (count.at(bin) == 0) return std::nullopt;
  return sum_z[bin] / static_cast<double>(count[bin]);
}

BinErrors xz_errors(const FrameMatch& match, const MatchConfig& cfg) {
  BinErrors errors(cfg.bin_count());
  for (const auto& [p, g] : match.pairs) {
    const GridLane& pl = match.pred_grid[p];
    const GridLane& gl = match.gt_grid[g];
    for (Eigen::Index i = 0; i < match.y_grid.size(); ++i) {
      if (!pl.visible[i] || !gl.visible[i]) continue;
      const std::size_t b = bin_of(match.y_grid[i], cfg.bin_edges);
      if (b >= cfg.bin_count()) continue;
      errors.sum_x[b] += std::abs(pl.x[i] - gl.x[i]);
      errors.sum_z[b] += std::abs(pl.z[i] - gl.z[i]);
      ++errors.count[b];
    }
  }
  return errors;
}

VisIouSum vis_iou(const FrameMatch& match) {
  VisIouSum out;
  for (const auto& [p, g] : match.pairs) {
    const GridLane& pl = match.pred_grid[p];
    const GridLane& gl = match.gt_grid[g];
    long inter = 0, uni = 0;
    for (std::size_t i = 0; i < pl.visible.size(); ++i) {
      inter += (pl.visible[i] && gl.visible[i]) ? 1 : 0;
      uni += (pl.visible[i] || gl.visible[i]) ? 1 : 0;
    }
    if (uni == 0) continue;
    out.sum += static_cast<double>(inter) / static_cast<double>(uni);
    ++out.pairs;
  }
  return out;
}

namespace {

double point_segment_distance(const Eigen::Vector3d& p, const Eigen::Vector3d& a,
                              const Eigen::Vector3d& b) {
  const Eigen::Vector3d ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + t * ab - p).norm();
}

}  // namespace

double unilateral_chamfer(const Eigen::MatrixX4d& gt, const Eigen::MatrixX4d& pred) {
  if (gt.rows() == 0) return 0.0;
  if (pred.rows() == 0) return std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < gt.rows(); ++i) {
    const Eigen::Vector3d p = gt.row(i).head<3>().transpose();
    double best = (pred.row(0).head<3>().transpose() - p).norm();
    for (Eigen::Index k = 0; k + 1 < pred.rows(); ++k) {
      best = std::min(best, point_segment_distance(p, pred.row(k).head<3>().transpose(),
                                                   pred.row(k + 1).head<3>().transpose()));
    }
    sum += best;
  }
  return sum / static_cast<double>(gt.rows());
}

F1Score ChamferCounts::score() const {
  return f1_from_counts(tp, num_pred - tp, num_gt - tp);
}

ChamferCounts chamfer_eval(const std::vector<Lane>& pred, const std::vector<Lane>& gt, double tau) {
  ChamferCounts counts;
  counts.num_pred = static_cast<long>(pred.size());
  counts.num_gt = static_cast<long>(gt.size());
  std::vector<std::tuple<double, int, int>> candidates;  // (cd, gt, pred)
  for (std::size_t g = 0; g < gt.size(); ++g) {
    for (std::size_t p = 0; p < pred.size(); ++p) {
      const double cd = unilateral_chamfer(gt[g].points, pred[p].points);
      if (cd < tau) candidates.emplace_back(cd, int(g), int(p));
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<char> gt_used(gt.size(), 0), pred_used(pred.size(), 0);
  for (const auto& [cd, g, p] : candidates) {
    if (gt_used[g] || pred_used[p]) continue;
    gt_used[g] = pred_used[p] = 1;
    ++counts.tp;
    counts.cd_sum += cd;
  }
  return counts;
}

EvalAccumulator::EvalAccumulator(MatchConfig cfg) : cfg_(std::move(cfg)), errors_(cfg_.bin_count()) {
  cfg_.validate();
}

void EvalAccumulator::add_frame(const std::vector<Lane>& pred, const std::vector<Lane>& gt) {
  const FrameMatch match = match_lanes(pred, gt, cfg_);
  tp_ += match.true_positives();
  fp_ += match.false_positives();
  fn_ += match.false_negatives();
  errors_.add(xz_errors(match, cfg_));
  const VisIouSum iou = vis_iou(match);
  iou_.sum += iou.sum;
  iou_.pairs += iou.pairs;
  chamfer_.add(chamfer_eval(pred, gt, cfg_.chamfer_threshold));
}

void EvalAccumulator::merge(const EvalAccumulator& other) {
  tp_ += other.tp_;
  fp_ += other.fp_;
  fn_ += other.fn_;
  errors_.add(other.errors_);
  iou_.sum += other.iou_.sum;
  iou_.pairs += other.iou_.pairs;
  chamfer_.add(other.chamfer_);
}

EvalResult EvalAccumulator::result() const {
  EvalResult r;
  r.tp = tp_;
  r.fp = fp_;
  r.fn = fn_;
  r.f1 = f1_from_counts(tp_, fp_, fn_);
  for (std::size_t b = 0; b < cfg_.bin_count(); ++b) {
    r.x_error.push_back(errors_.mean_x(b));
    r.z_error.push_back(errors_.mean_z(b));
  }
  r.vis_iou = iou_.mean();
  r.chamfer_f1 = chamfer_.score();
  r.chamfer_distance = chamfer_.mean_cd();
  r.bin_edges = cfg_.bin_edges;
  return r;
}

EvalResult evaluate_frames(const std::vector<LaneFrame>& pred, const std::vector<LaneFrame>& gt,
                           const MatchConfig& cfg) {
  std::map<int, const LaneFrame*> pred_by_id;
  for (const auto& f : pred) {
    if (!pred_by_id.emplace(f.frame_id, &f).second) {
      throw std::invalid_argument("duplicate prediction frame_id " + std::to_string(f.frame_id));
    }
  }
  EvalAccumulator acc(cfg);
  const std::vector<Lane> none;
  std::map<int, bool> seen;
  for (const auto& g : gt) {
    if (!seen.emplace(g.frame_id, true).second) {
      throw std::invalid_argument("duplicate GT frame_id " + std::to_string(g.frame_id));
    }
    const auto it = pred_by_id.find(g.frame_id);
    acc.add_frame(it == pred_by_id.end() ? none : it->second->lanes, g.lanes);
  }
  for (const auto& [id, frame] : pred_by_id) {
    if (!seen.count(id)) acc.add_frame(frame->lanes, none);
  }
  return acc.result();
}

}  // namespace lanestp
