#pragma once

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "lanestp/frame.hpp"

namespace lanestp {

struct MatchConfig {
  double point_threshold = 1.5;   // m
  double match_fraction = 0.75;   // of co-visible grid points
  double y_min = 0.0;
  double y_max = 200.0;
  double y_step = 2.0;
  std::vector<double> bin_edges{0.0, 40.0, 100.0, 150.0, 200.0};
  double chamfer_threshold = 0.3; // m
  double visibility_threshold = 0.5;

  void validate() const;
  Eigen::VectorXd y_grid() const;
  std::size_t bin_count() const { return bin_edges.size() - 1; }
};

/// Lane resampled on the evaluation grid. `present` marks grid points inside
/// the lane's y extent; `visible` additionally requires v >= threshold.
struct GridLane {
  Eigen::VectorXd x, z, v;
  std::vector<char> present, visible;
};

GridLane resample_lane(const Eigen::MatrixX4d& points, const Eigen::VectorXd& y_grid,
                       double visibility_threshold = 0.5);

struct FrameMatch {
  std::vector<std::pair<int, int>> pairs;  // (pred, gt)
  std::vector<int> unmatched_pred;
  std::vector<int> unmatched_gt;
  std::vector<GridLane> pred_grid;
  std::vector<GridLane> gt_grid;
  Eigen::VectorXd y_grid;

  int true_positives() const { return static_cast<int>(pairs.size()); }
  int false_positives() const { return static_cast<int>(unmatched_pred.size()); }
  int false_negatives() const { return static_cast<int>(unmatched_gt.size()); }
};

/// Grid-based lane matching: points match below the distance threshold, a
/// pair is admissible when at least `match_fraction` of its co-visible points
/// match, and admissible pairs are assigned one-to-one at minimum mean distance.
FrameMatch match_lanes(const std::vector<Lane>& pred, const std::vector<Lane>& gt,
                       const MatchConfig& cfg);

struct F1Score {
  double f1 = 0.0, precision = 0.0, recall = 0.0;
};

F1Score f1_from_counts(long tp, long fp, long fn);
F1Score f1_score(const FrameMatch& match);

/// Per-bin absolute error sums over matched co-visible grid points.
struct BinErrors {
  std::vector<double> sum_x, sum_z;
  std::vector<long> count;

  explicit BinErrors(std::size_t bins = 0) : sum_x(bins, 0.0), sum_z(bins, 0.0), count(bins, 0) {}
  void add(const BinErrors& other);
  std::optional<double> mean_x(std::size_t bin) const;
  std::optional<double> mean_z(std::size_t bin) const;
};

BinErrors xz_errors(const FrameMatch& match, const MatchConfig& cfg);

/// Sum of per-pair visibility IoU and the number of pairs with a non-empty union.
struct VisIouSum {
  double sum = 0.0;
  long pairs = 0;
  std::optional<double> mean() const {
    if (pairs == 0) return std::nullopt;
    return sum / static_cast<double>(pairs);
  }
};

VisIouSum vis_iou(const FrameMatch& match);

/// Unilateral chamfer distance: mean distance from each GT sample to the
/// nearest point of the predicted polyline.
double unilateral_chamfer(const Eigen::MatrixX4d& gt, const Eigen::MatrixX4d& pred);

struct ChamferCounts {
  long tp = 0, num_pred = 0, num_gt = 0;
  double cd_sum = 0.0;

  void add(const ChamferCounts& o) {
    tp += o.tp;
    num_pred += o.num_pred;
    num_gt += o.num_gt;
    cd_sum += o.cd_sum;
  }
  F1Score score() const;
  double mean_cd() const { return tp == 0 ? 0.0 : cd_sum / static_cast<double>(tp); }
};

ChamferCounts chamfer_eval(const std::vector<Lane>& pred, const std::vector<Lane>& gt, double tau);

struct EvalResult {
  F1Score f1;
  long tp = 0, fp = 0, fn = 0;
  std::vector<std::optional<double>> x_error, z_error;  // per bin
  std::optional<double> vis_iou;
  F1Score chamfer_f1;
  double chamfer_distance = 0.0;
  std::vector<double> bin_edges;
};

/// Order-independent accumulator over frames.
class EvalAccumulator {
 public:
  explicit EvalAccumulator(MatchConfig cfg);
  void add_frame(const std::vector<Lane>& pred, const std::vector<Lane>& gt);
  void merge(const EvalAccumulator& other);
  EvalResult result() const;
  const MatchConfig& config() const { return cfg_; }

 private:
  MatchConfig cfg_;
  long tp_ = 0, fp_ = 0, fn_ = 0;
  BinErrors errors_;
  VisIouSum iou_;
  ChamferCounts chamfer_;
};

/// Pairs frames by frame_id; GT frames without a prediction count as misses
/// and prediction frames without GT as false positives.
EvalResult evaluate_frames(const std::vector<LaneFrame>& pred, const std::vector<LaneFrame>& gt,
                           const MatchConfig& cfg);

}  // namespace lanestp
