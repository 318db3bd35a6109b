#pragma once

#include <vector>

#include <Eigen/Core>

#include "lanestp/pose.hpp"
#include "lanestp/spline.hpp"

namespace lanestp {

inline constexpr double kProbabilityEpsilon = 1e-7;

/// Ground-truth lane: dense (x, y, z, v) samples, v in {0, 1}.
struct GtLane {
  Eigen::MatrixX4d points;
  int category = 0;
};

/// N proposals with an N x (K+1) class probability matrix; the last column is
/// the background class.
struct ProposalSet {
  std::vector<ControlPoints> lanes;
  Eigen::MatrixXd class_probs;

  int size() const { return static_cast<int>(lanes.size()); }
  int background_class() const { return static_cast<int>(class_probs.cols()) - 1; }
};

struct Matching {
  std::vector<int> gt_to_proposal;
  std::vector<int> proposal_to_gt;  // -1 = background
  double total_cost = 0.0;

  bool empty() const { return gt_to_proposal.empty(); }
  /// Classification targets per proposal (background for unmatched ones).
  std::vector<int> targets(const std::vector<GtLane>& gts, int background) const;
};

/// Matching cost of one proposal against one GT lane: mean visible L1 (x, z)
/// distance plus cls_weight * (1 - p(gt category)).
double proposal_cost(const ControlPoints& lane, const Eigen::Ref<const Eigen::RowVectorXd>& probs,
                     const GtLane& gt, const CurveConfig& cfg, double cls_weight = 1.0);

/// Minimum-cost injective GT -> proposal assignment.
Matching assign_proposals(const ProposalSet& proposals, const std::vector<GtLane>& gts,
                          const CurveConfig& cfg, double cls_weight = 1.0);

struct LossValue {
  double value = 0.0;
  bool empty_matching = false;
};

/// (1/N) sum over matched pairs of sum_j v_j * |(fx, fz)(s_j) - (x_j, z_j)|_1.
LossValue regression_loss(const ProposalSet& proposals, const std::vector<GtLane>& gts,
                          const Matching& matching, const CurveConfig& cfg);

/// Gradient of regression_loss w.r.t. the x and z control values, one M x 2
/// block per proposal (zero for unmatched proposals).
std::vector<Eigen::MatrixX2d> regression_loss_grad(const ProposalSet& proposals,
                                                   const std::vector<GtLane>& gts,
                                                   const Matching& matching,
                                                   const CurveConfig& cfg);

/// Binary cross-entropy of the predicted visibility curve against GT flags,
/// summed over GT samples and averaged over matched lanes.
LossValue visibility_loss(const ProposalSet& proposals, const std::vector<GtLane>& gts,
                          const Matching& matching, const CurveConfig& cfg);

/// Focal loss -(1/N) sum_i (1 - C_it)^gamma log C_it for one-hot targets t.
double focal_classification_loss(const Eigen::Ref<const Eigen::MatrixXd>& class_probs,
                                 const std::vector<int>& targets, double gamma);

struct SpatialConfig {
  double max_curvature = 0.1;  // 1/m
};

struct SpatialTerms {
  double parallel = 0.0;
  double smooth = 0.0;
  double curvature = 0.0;
};

/// Lane parallelism, vertical smoothness and curvature hinge over predicted
/// curves sampled at `sample_args`.
SpatialTerms spatial_regularization(const std::vector<ControlPoints>& lanes,
                                    const Eigen::VectorXd& sample_args, const CurveConfig& cfg,
                                    const SpatialConfig& spatial = {});

/// Mean over laterally adjacent pairs of the visibility-weighted variance of
/// the x-y orthogonal gap. Lanes are (x, y, z, v) polylines ordered along y.
double parallel_term(const std::vector<Eigen::MatrixX4d>& lanes);

/// Exponential moving average of lane curves on a fixed y grid. lanes[i] is
/// (x, y, z, v) on y_grid, expressed in the frame of `pose`.
struct EmaState {
  Eigen::VectorXd y_grid;
  std::vector<Eigen::MatrixX4d> lanes;
  EgoPose pose;
  double alpha = 0.5;

  bool empty() const { return lanes.empty(); }
};

/// Propagates the prior EMA into `pose`, associates it with the current lanes
/// (sampled on the state's y grid, gated by mean |dx| <= gate metres) and
/// blends alpha*current + (1-alpha)*prior. The returned lanes are
/// index-aligned with `current`; grid points the prior does not cover take the
/// current value.
EmaState ema_update(const EmaState& prior, const std::vector<Eigen::MatrixX4d>& current,
                    const EgoPose& pose, double gate = 1.0);

/// Empty state on a y grid.
EmaState make_ema_state(const Eigen::VectorXd& y_grid, double alpha);

/// (1/N) sum_i mean_s vbar_i(s) * |f_i(s) - fbar_i(s)|_1 over index-aligned lanes.
double temporal_consistency_loss(const std::vector<Eigen::MatrixX4d>& current,
                                 const EmaState& state);

struct LossWeights {
  double reg = 1.0;
  double vis = 1.0;
  double cls = 1.0;
  double parallel = 1.0;
  double smooth = 1.0;
  double curvature = 1.0;
  double temporal = 1.0;
};

struct LossBreakdown {
  double reg = 0.0;
  double vis = 0.0;
  double cls = 0.0;
  double spatial_parallel = 0.0;
  double spatial_smooth = 0.0;
  double spatial_curv = 0.0;
  double temporal = 0.0;

  double total(const LossWeights& w) const {
    return w.reg * reg + w.vis * vis + w.cls * cls + w.parallel * spatial_parallel +
           w.smooth * spatial_smooth + w.curvature * spatial_curv + w.temporal * temporal;
  }
};

}  // namespace lanestp
