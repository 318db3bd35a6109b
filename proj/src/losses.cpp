#include "lanestp/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "lanestp/assignment.hpp"

namespace lanestp {

namespace {

// Predicted curve evaluated at the GT sample arguments.
Eigen::MatrixX4d predict_at_gt(const ControlPoints& lane, const GtLane& gt, const CurveConfig& cfg,
                               BasisMatrix* basis_out = nullptr) {
  BasisMatrix basis = build_basis<double>(cfg, args_for_y(gt.points.col(kY), cfg), 0);
  Eigen::MatrixX4d out = evaluate_curve(lane, basis);
  if (basis_out) *basis_out = std::move(basis);
  return out;
}

void check_matching(const ProposalSet& proposals, const std::vector<GtLane>& gts,
                    const Matching& matching) {
  if (matching.gt_to_proposal.size() != gts.size()) {
    throw std::invalid_argument("matching does not cover the GT lanes");
  }
  for (int p : matching.gt_to_proposal) {
    if (p < 0 || p >= proposals.size()) throw std::invalid_argument("matching proposal out of range");
  }
}

double clamp_probability(double p) {
  return std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

}  // namespace

std::vector<int> Matching::targets(const std::vector<GtLane>& gts, int background) const {
  std::vector<int> out(proposal_to_gt.size(), background);
  for (std::size_t i = 0; i < proposal_to_gt.size(); ++i) {
    if (proposal_to_gt[i] >= 0) out[i] = gts[proposal_to_gt[i]].category;
  }
  return out;
}

double proposal_cost(const ControlPoints& lane, const Eigen::Ref<const Eigen::RowVectorXd>& probs,
                     const GtLane& gt, const CurveConfig& cfg, double cls_weight) {
  const Eigen::MatrixX4d pred = predict_at_gt(lane, gt, cfg);
  const Eigen::VectorXd vis = gt.points.col(kV);
  const double visible = vis.sum();
  double geometry = 0.0;
  if (visible > 0.0) {
    const Eigen::VectorXd l1 = (pred.col(kX) - gt.points.col(kX)).cwiseAbs() +
                               (pred.col(kZ) - gt.points.col(kZ)).cwiseAbs();
    geometry = vis.dot(l1) / visible;
  }
  if (gt.category < 0 || gt.category >= probs.size() - 1) {
    throw std::invalid_argument("GT category outside the foreground classes");
  }
  return geometry + cls_weight * (1.0 - probs[gt.category]);
}

Matching assign_proposals(const ProposalSet& proposals, const std::vector<GtLane>& gts,
                          const CurveConfig& cfg, double cls_weight) {
  const int n = proposals.size();
  const int g = static_cast<int>(gts.size());
  if (g > n) throw std::invalid_argument("more GT lanes than proposals");
  if (proposals.class_probs.rows() != n) {
    throw std::invalid_argument("one class probability row per proposal required");
  }
  Eigen::MatrixXd cost(g, n);
  for (int r = 0; r < g; ++r) {
    for (int c = 0; c < n; ++c) {
      cost(r, c) = proposal_cost(proposals.lanes[c], proposals.class_probs.row(c), gts[r], cfg,
                                 cls_weight);
    }
  }
  const Assignment assignment = solve_assignment(cost);
  Matching matching;
  matching.gt_to_proposal = assignment.row_to_col;
  matching.proposal_to_gt.assign(n, -1);
  for (int r = 0; r < g; ++r) matching.proposal_to_gt[matching.gt_to_proposal[r]] = r;
  matching.total_cost = assignment.total_cost;
  return matching;
}

LossValue regression_loss(const ProposalSet& proposals, const std::vector<GtLane>& gts,
                          const Matching& matching, const CurveConfig& cfg) {
  if (matching.empty() || proposals.size() == 0) return {0.0, true};
  check_matching(proposals, gts, matching);
  double sum = 0.0;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    const Eigen::MatrixX4d pred = predict_at_gt(proposals.lanes[matching.gt_to_proposal[g]], gts[g], cfg);
    const auto& gt = gts[g].points;
    sum += gt.col(kV).dot((pred.col(kX) - gt.col(kX)).cwiseAbs() +
                          (pred.col(kZ) - gt.col(kZ)).cwiseAbs());
  }
  return {sum / proposals.size(), false};
}

std::vector<Eigen::MatrixX2d> regression_loss_grad(const ProposalSet& proposals,
                                                   const std::vector<GtLane>& gts,
                                                   const Matching& matching,
                                                   const CurveConfig& cfg) {
  std::vector<Eigen::MatrixX2d> grads;
  grads.reserve(proposals.lanes.size());
  for (const auto& lane : proposals.lanes) grads.push_back(Eigen::MatrixX2d::Zero(lane.rows(), 2));
  if (matching.empty() || proposals.size() == 0) return grads;
  check_matching(proposals, gts, matching);

  const auto sign = [](double r) { return double((r > 0.0) - (r < 0.0)); };
  for (std::size_t g = 0; g < gts.size(); ++g) {
    const int p = matching.gt_to_proposal[g];
    BasisMatrix basis;
    const Eigen::MatrixX4d pred = predict_at_gt(proposals.lanes[p], gts[g], cfg, &basis);
    const auto& gt = gts[g].points;
    const Eigen::VectorXd gx =
        gt.col(kV).cwiseProduct((pred.col(kX) - gt.col(kX)).unaryExpr(sign));
    const Eigen::VectorXd gz =
        gt.col(kV).cwiseProduct((pred.col(kZ) - gt.col(kZ)).unaryExpr(sign));
    grads[p].col(0) += basis.weights.transpose() * gx / proposals.size();
    grads[p].col(1) += basis.weights.transpose() * gz / proposals.size();
  }
  return grads;
}

LossValue visibility_loss(const ProposalSet& proposals, const std::vector<GtLane>& gts,
                          const Matching& matching, const CurveConfig& cfg) {
  if (matching.empty()) return {0.0, true};
  check_matching(proposals, gts, matching);
  double sum = 0.0;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    const Eigen::MatrixX4d pred = predict_at_gt(proposals.lanes[matching.gt_to_proposal[g]], gts[g], cfg);
    const auto& gt = gts[g].points;
    for (Eigen::Index j = 0; j < gt.rows(); ++j) {
      const double v = clamp_probability(pred(j, kV));
      const double target = gt(j, kV);
      sum -= target * std::log(v) + (1.0 - target) * std::log(1.0 - v);
    }
  }
  return {sum / static_cast<double>(gts.size()), false};
}

double focal_classification_loss(const Eigen::Ref<const Eigen::MatrixXd>& class_probs,
                                 const std::vector<int>& targets, double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("focal loss gamma must be >= 0");
  if (static_cast<Eigen::Index>(targets.size()) != class_probs.rows()) {
    throw std::invalid_argument("one target per proposal required");
  }
  if (targets.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || targets[i] >= class_probs.cols()) {
      throw std::invalid_argument("focal loss target outside the class range");
    }
    const double p = std::max(class_probs(Eigen::Index(i), targets[i]), kProbabilityEpsilon);
    sum -= std::pow(1.0 - p, gamma) * std::log(p);
  }
  return sum / static_cast<double>(targets.size());
}

namespace {

// Unit x-y tangent of a polyline at vertex i (central differences inside).
Eigen::Vector2d polyline_tangent(const Eigen::MatrixX4d& lane, Eigen::Index i) {
  const Eigen::Index n = lane.rows();
  const Eigen::Index a = std::max<Eigen::Index>(i - 1, 0);
  const Eigen::Index b = std::min<Eigen::Index>(i + 1, n - 1);
  Eigen::Vector2d t(lane(b, kX) - lane(a, kX), lane(b, kY) - lane(a, kY));
  const double len = t.norm();
  if (len < 1e-12) return {0.0, 1.0};
  return t / len;
}

// Signed distance along `normal` from `origin` to the first crossing of the
// polyline; returns false when the normal line misses it.
bool normal_crossing(const Eigen::Vector2d& origin, const Eigen::Vector2d& normal,
                     const Eigen::MatrixX4d& other, double* gap, double* visibility) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k + 1 < other.rows(); ++k) {
    const Eigen::Vector2d p0(other(k, kX), other(k, kY));
    const Eigen::Vector2d p1(other(k + 1, kX), other(k + 1, kY));
    const Eigen::Vector2d d = p1 - p0;
    const double det = normal.x() * (-d.y()) - normal.y() * (-d.x());
    if (std::abs(det) < 1e-15) continue;
    const Eigen::Vector2d rhs = p0 - origin;
    const double lambda = (rhs.x() * (-d.y()) - rhs.y() * (-d.x())) / det;
    const double mu = (normal.x() * rhs.y() - normal.y() * rhs.x()) / det;
    if (mu < -1e-12 || mu > 1.0 + 1e-12) continue;
    if (std::abs(lambda) < std::abs(best)) {
      best = lambda;
      const double w = std::clamp(mu, 0.0, 1.0);
      *visibility = (1.0 - w) * other(k, kV) + w * other(k + 1, kV);
    }
  }
  if (!std::isfinite(best)) return false;
  *gap = std::abs(best);
  return true;
}

}  // namespace

double parallel_term(const std::vector<Eigen::MatrixX4d>& lanes) {
  if (lanes.size() < 2) return 0.0;
  std::vector<std::size_t> order(lanes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return lanes[a].col(kX).mean() < lanes[b].col(kX).mean();
  });

  double total = 0.0;
  int pairs = 0;
  for (std::size_t p = 0; p + 1 < order.size(); ++p) {
    const auto& ref = lanes[order[p]];
    const auto& other = lanes[order[p + 1]];
    double weight_sum = 0.0, mean = 0.0, m2 = 0.0;
    // Weighted Welford accumulation of the gap samples.
    for (Eigen::Index i = 0; i < ref.rows(); ++i) {
      const Eigen::Vector2d t = polyline_tangent(ref, i);
      const Eigen::Vector2d normal(t.y(), -t.x());
      double gap = 0.0, vis_other = 0.0;
      if (!normal_crossing({ref(i, kX), ref(i, kY)}, normal, other, &gap, &vis_other)) continue;
      const double w = ref(i, kV) * vis_other;
      if (w <= 0.0) continue;
      weight_sum += w;
      const double delta = gap - mean;
      mean += (w / weight_sum) * delta;
      m2 += w * delta * (gap - mean);
    }
    if (weight_sum <= 0.0) continue;
    total += std::max(m2 / weight_sum, 0.0);
    ++pairs;
  }
  return pairs == 0 ? 0.0 : total / pairs;
}

SpatialTerms spatial_regularization(const std::vector<ControlPoints>& lanes,
                                    const Eigen::VectorXd& sample_args, const CurveConfig& cfg,
                                    const SpatialConfig& spatial) {
  SpatialTerms terms;
  if (lanes.empty()) return terms;
  const BasisMatrix b0 = build_basis<double>(cfg, sample_args, 0);
  const BasisMatrix b1 = build_basis<double>(cfg, sample_args, 1);
  const BasisMatrix b2 = build_basis<double>(cfg, sample_args, 2);

  std::vector<Eigen::MatrixX4d> sampled;
  sampled.reserve(lanes.size());
  // Second derivative of z w.r.t. y in metres: y(s) is linear in s.
  const double y_span = cfg.y_end - cfg.y_start;
  for (const auto& lane : lanes) {
    sampled.push_back(evaluate_curve(lane, b0));
    const Eigen::MatrixX4d d1 = evaluate_curve(lane, b1);
    const Eigen::MatrixX4d d2 = evaluate_curve(lane, b2);

    const Eigen::VectorXd zyy = d2.col(kZ) / (y_span * y_span);
    terms.smooth += zyy.squaredNorm() / static_cast<double>(zyy.size());

    double hinge = 0.0;
    for (Eigen::Index r = 0; r < d1.rows(); ++r) {
      const double xs = d1(r, kX), ys = d1(r, kY);
      const double speed2 = xs * xs + ys * ys;
      if (speed2 < 1e-18) continue;
      const double kappa = std::abs(xs * d2(r, kY) - ys * d2(r, kX)) / std::pow(speed2, 1.5);
      hinge += std::max(0.0, kappa - spatial.max_curvature);
    }
    terms.curvature += hinge / static_cast<double>(d1.rows());
  }
  terms.smooth /= static_cast<double>(lanes.size());
  terms.curvature /= static_cast<double>(lanes.size());
  terms.parallel = parallel_term(sampled);
  return terms;
}

EmaState make_ema_state(const Eigen::VectorXd& y_grid, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("EMA alpha must lie in [0, 1]");
  if (y_grid.size() < 2) throw std::invalid_argument("EMA grid needs at least 2 points");
  EmaState state;
  state.y_grid = y_grid;
  state.alpha = alpha;
  return state;
}

namespace {

struct GridCurve {
  Eigen::MatrixX4d values;
  std::vector<char> covered;
};

// Linear resampling of an (x, y, z, v) polyline, monotone in y, on y_grid.
GridCurve resample_on_grid(const Eigen::MatrixX4d& lane, const Eigen::VectorXd& y_grid) {
  GridCurve out;
  out.values.setZero(y_grid.size(), 4);
  out.covered.assign(y_grid.size(), 0);
  const Eigen::Index n = lane.rows();
  if (n < 2) return out;
  Eigen::Index k = 0;
  for (Eigen::Index g = 0; g < y_grid.size(); ++g) {
    const double y = y_grid[g];
    out.values(g, kY) = y;
    if (y < lane(0, kY) - 1e-12 || y > lane(n - 1, kY) + 1e-12) continue;
    while (k + 2 < n && lane(k + 1, kY) < y) ++k;
    const double y0 = lane(k, kY), y1 = lane(k + 1, kY);
    const double w = y1 > y0 ? std::clamp((y - y0) / (y1 - y0), 0.0, 1.0) : 0.0;
    for (int c : {int(kX), int(kZ), int(kV)}) {
      out.values(g, c) = (1.0 - w) * lane(k, c) + w * lane(k + 1, c);
    }
    out.covered[g] = 1;
  }
  return out;
}

}  // namespace

EmaState ema_update(const EmaState& prior, const std::vector<Eigen::MatrixX4d>& current,
                    const EgoPose& pose, double gate) {
  const Eigen::Index grid = prior.y_grid.size();
  for (const auto& lane : current) {
    if (lane.rows() != grid) throw std::invalid_argument("current lanes must be sampled on the EMA grid");
  }
  EmaState next;
  next.y_grid = prior.y_grid;
  next.alpha = prior.alpha;
  next.pose = pose;
  next.lanes = current;
  if (prior.empty() || current.empty()) return next;

  std::vector<GridCurve> propagated;
  propagated.reserve(prior.lanes.size());
  for (const auto& lane : prior.lanes) {
    propagated.push_back(resample_on_grid(propagate_points(lane, prior.pose, pose), prior.y_grid));
  }

  // Association on mean |dx| over commonly covered grid points, gated.
  const double big = 1e9;
  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(current.size(), propagated.size(), big);
  for (std::size_t i = 0; i < current.size(); ++i) {
    for (std::size_t j = 0; j < propagated.size(); ++j) {
      double sum = 0.0;
      int count = 0;
      for (Eigen::Index g = 0; g < grid; ++g) {
        if (!propagated[j].covered[g]) continue;
        sum += std::abs(current[i](g, kX) - propagated[j].values(g, kX));
        ++count;
      }
      if (count > 0 && sum / count <= gate) cost(i, j) = sum / count;
    }
  }
  const Assignment assignment = solve_assignment(cost);

  const double a = prior.alpha;
  for (std::size_t i = 0; i < current.size(); ++i) {
    const int j = assignment.row_to_col[i];
    if (j < 0 || cost(Eigen::Index(i), j) >= big) continue;
    for (Eigen::Index g = 0; g < grid; ++g) {
      if (!propagated[j].covered[g]) continue;
      for (int c : {int(kX), int(kZ), int(kV)}) {
        next.lanes[i](g, c) = a * current[i](g, c) + (1.0 - a) * propagated[j].values(g, c);
      }
    }
  }
  return next;
}

double temporal_consistency_loss(const std::vector<Eigen::MatrixX4d>& current,
                                 const EmaState& state) {
  if (state.empty() || current.empty()) return 0.0;
  if (state.lanes.size() != current.size()) {
    throw std::invalid_argument("EMA state is not aligned with the current lanes");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < current.size(); ++i) {
    const auto& f = current[i];
    const auto& ema = state.lanes[i];
    if (f.rows() != ema.rows()) throw std::invalid_argument("EMA and prediction grids differ");
    const Eigen::VectorXd l1 = (f.leftCols<3>() - ema.leftCols<3>()).cwiseAbs().rowwise().sum();
    sum += ema.col(kV).dot(l1) / static_cast<double>(f.rows());
  }
  return sum / static_cast<double>(current.size());
}

}  // namespace lanestp
