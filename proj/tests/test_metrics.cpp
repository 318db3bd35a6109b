#include <doctest.h>

#include <functional>

#include "lanestp/metrics.hpp"
#include "support.hpp"

using namespace lanestp;

namespace {

Lane polyline(double x0, double slope = 0.0, double y0 = 0.0, double y1 = 200.0, double step = 1.0, double z = 0.0) {
  const int n = static_cast<int>(std::round((y1 - y0) / step)) + 1;
  Lane lane;
  lane.points.resize(n, 4);
  for (int i = 0; i < n; ++i) {
    const double y = y0 + step * i;
    lane.points.row(i) << x0 + slope * y, y, z, 1.0;
  }
  return lane;
}

Lane with_x(Lane lane, const std::function<double(double)>& dx) {
  for (Eigen::Index i = 0; i < lane.points.rows(); ++i) lane.points(i, kX) += dx(lane.points(i, kY));
  return lane;
}

// Exhaustive optimum over admissible injective pred -> gt maps (pred count <= gt count).
std::pair<int, double> brute_force(const FrameMatch& m, const MatchConfig& cfg, std::size_t npred, std::size_t ngt) {
  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(npred, ngt, INFINITY);
  for (std::size_t p = 0; p < npred; ++p) {
    for (std::size_t g = 0; g < ngt; ++g) {
      int co = 0, hit = 0;
      double sum = 0.0;
      for (Eigen::Index k = 0; k < m.y_grid.size(); ++k) {
        if (!m.pred_grid[p].visible[k] || !m.gt_grid[g].visible[k]) continue;
        const double d = std::hypot(m.pred_grid[p].x[k] - m.gt_grid[g].x[k], m.pred_grid[p].z[k] - m.gt_grid[g].z[k]);
        ++co;
        sum += d;
        hit += d < cfg.point_threshold;
      }
      if (co > 0 && hit >= cfg.match_fraction * co) cost(p, g) = sum / co;
    }
  }
  std::vector<int> cols(ngt);
  std::iota(cols.begin(), cols.end(), 0);
  int best_count = 0;
  double best_cost = 0.0;
  do {
    int count = 0;
    double c = 0.0;
    for (std::size_t p = 0; p < npred; ++p) {
      if (std::isfinite(cost(p, cols[p]))) {
        ++count;
        c += cost(p, cols[p]);
      }
    }
    if (count > best_count || (count == best_count && c < best_cost)) {
      best_count = count;
      best_cost = c;
    }
  } while (std::next_permutation(cols.begin(), cols.end()));
  return {best_count, best_cost};
}

}  // namespace

TEST_CASE("lane matching examples") {
  const MatchConfig cfg;
  const FrameMatch same = match_lanes({polyline(1.0)}, {polyline(1.0)}, cfg);
  CHECK(same.true_positives() == 1);
  CHECK(same.false_positives() == 0);
  CHECK(same.false_negatives() == 0);

  const FrameMatch off = match_lanes({polyline(3.0)}, {polyline(1.0)}, cfg);
  CHECK(off.true_positives() == 0);
  CHECK(off.false_positives() == 1);
  CHECK(off.false_negatives() == 1);

  const FrameMatch empty = match_lanes({}, {}, cfg);
  CHECK(empty.pairs.empty());
  CHECK(empty.unmatched_gt.empty());

  // Two predictions close to two GT lanes, the middle one ambiguous.
  const std::vector<Lane> gts{polyline(0.0), polyline(1.2), polyline(5.0)};
  const std::vector<Lane> preds{polyline(0.7), polyline(0.5), polyline(5.3)};
  const FrameMatch m = match_lanes(preds, gts, cfg);
  const auto [count, cost] = brute_force(m, cfg, preds.size(), gts.size());
  CHECK(m.true_positives() == count);
  double total = 0.0;
  for (auto [p, g] : m.pairs) {
    double s = 0.0;
    int n = 0;
    for (Eigen::Index k = 0; k < m.y_grid.size(); ++k) {
      if (m.pred_grid[p].visible[k] && m.gt_grid[g].visible[k]) {
        s += std::hypot(m.pred_grid[p].x[k] - m.gt_grid[g].x[k], m.pred_grid[p].z[k] - m.gt_grid[g].z[k]);
        ++n;
      }
    }
    total += s / n;
  }
  CHECK(total == doctest::Approx(cost).epsilon(1e-12));
}

TEST_CASE("lane matching against random exhaustive search") {
  std::mt19937_64 rng(40);
  std::uniform_real_distribution<double> x(-3.0, 3.0), slope(-0.01, 0.01);
  const MatchConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Lane> preds, gts;
    for (int i = 0; i < 3; ++i) gts.push_back(polyline(x(rng), slope(rng)));
    for (int i = 0; i < 3; ++i) preds.push_back(polyline(x(rng), slope(rng)));
    const FrameMatch m = match_lanes(preds, gts, cfg);
    const auto [count, cost] = brute_force(m, cfg, 3, 3);
    CHECK(m.true_positives() == count);
  }
}

TEST_CASE("f1 examples") {
  const F1Score all = f1_from_counts(3, 0, 0);
  CHECK(all.f1 == 1.0);
  const F1Score none = f1_from_counts(0, 0, 4);
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);
  const F1Score mixed = f1_from_counts(2, 1, 1);
  CHECK(mixed.precision == doctest::Approx(2.0 / 3.0));
  CHECK(mixed.recall == doctest::Approx(2.0 / 3.0));
  CHECK(mixed.f1 == doctest::Approx(2.0 / 3.0));
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<long> u(0, 20);
  for (int i = 0; i < 200; ++i) {
    const F1Score s = f1_from_counts(u(rng), u(rng), u(rng));
    CHECK(s.f1 <= std::min(2 * s.precision, 2 * s.recall) + 1e-15);
    CHECK(s.f1 >= 0.0);
    CHECK(s.f1 <= 1.0);
  }
}

TEST_CASE("binned x and z errors") {
  const MatchConfig cfg;
  const Lane gt = polyline(0.0);
  const BinErrors zero = xz_errors(match_lanes({gt}, {gt}, cfg), cfg);
  for (std::size_t b = 0; b < cfg.bin_count(); ++b) CHECK(zero.mean_x(b).value() == 0.0);

  const BinErrors shifted = xz_errors(match_lanes({with_x(gt, [](double) { return 0.1; })}, {gt}, cfg), cfg);
  for (std::size_t b = 0; b < cfg.bin_count(); ++b) {
    CHECK(shifted.mean_x(b).value() == doctest::Approx(0.1));
    CHECK(shifted.mean_z(b).value() == doctest::Approx(0.0));
  }

  const Lane piecewise = with_x(gt, [](double y) { return y < 40.0 ? 0.1 : 0.3; });
  const BinErrors pw = xz_errors(match_lanes({piecewise}, {gt}, cfg), cfg);
  CHECK(pw.mean_x(0).value() == doctest::Approx(0.1));
  CHECK(pw.mean_x(1).value() == doctest::Approx(0.3));

  const Lane short_gt = polyline(0.0, 0.0, 0.0, 90.0);
  const BinErrors partial = xz_errors(match_lanes({short_gt}, {short_gt}, cfg), cfg);
  CHECK_FALSE(partial.mean_x(2).has_value());
  CHECK_FALSE(partial.mean_x(3).has_value());
}

TEST_CASE("visibility IoU") {
  MatchConfig cfg;
  cfg.y_max = 100.0;
  cfg.y_step = 10.0;
  Lane gt = polyline(0.0, 0.0, 0.0, 100.0, 10.0);
  Lane pred = gt;
  CHECK(vis_iou(match_lanes({pred}, {gt}, cfg)).mean().value() == 1.0);
  for (Eigen::Index i = 0; i < gt.points.rows(); ++i) {
    const double y = gt.points(i, kY);
    pred.points(i, kV) = y <= 60.0 ? 1.0 : 0.0;
    gt.points(i, kV) = y >= 40.0 ? 1.0 : 0.0;
  }
  // Matching uses co-visible points, so the pair still matches.
  const FrameMatch m = match_lanes({pred}, {gt}, cfg);
  REQUIRE(m.true_positives() == 1);
  CHECK(vis_iou(m).mean().value() == doctest::Approx(3.0 / 11.0).epsilon(1e-15));

  Lane a = polyline(0.0, 0.0, 0.0, 100.0, 10.0), b = a;
  for (Eigen::Index i = 0; i < a.points.rows(); ++i) {
    a.points(i, kV) = i % 2;
    b.points(i, kV) = 1 - i % 2;
  }
  FrameMatch forced = match_lanes({a}, {a}, cfg);
  forced.pred_grid[0] = resample_lane(b.points, forced.y_grid);
  CHECK(vis_iou(forced).mean().value() == 0.0);
}

TEST_CASE("chamfer examples") {
  const Lane gt = polyline(0.0, 0.0, 0.0, 50.0, 0.5);
  const ChamferCounts same = chamfer_eval({gt}, {gt}, 0.3);
  CHECK(same.score().f1 == 1.0);
  CHECK(same.mean_cd() == 0.0);
  const Lane far = polyline(1.0, 0.0, 0.0, 50.0, 0.5);
  CHECK(chamfer_eval({far}, {gt}, 0.3).tp == 0);
  const Lane near = polyline(0.1, 0.0, 0.0, 50.0, 0.5);
  CHECK(unilateral_chamfer(gt.points, near.points) == doctest::Approx(0.1).epsilon(1e-12));
  const ChamferCounts c = chamfer_eval({near}, {gt}, 0.3);
  CHECK(c.tp == 1);
  CHECK(c.mean_cd() == doctest::Approx(0.1));
  CHECK(chamfer_eval({}, {}, 0.3).score().f1 == 0.0);
  // Nearest-point distance on the dense polyline, checked by brute force.
  std::mt19937_64 rng(42);
  const Eigen::MatrixX4d a = testing::random_points(rng, 30), b = testing::random_points(rng, 40);
  double sum = 0.0;
  for (int i = 0; i < 30; ++i) {
    double best = INFINITY;
    for (int j = 0; j < 40; ++j) best = std::min(best, (a.row(i).head<3>() - b.row(j).head<3>()).norm());
    sum += best;
  }
  CHECK(unilateral_chamfer(a, b) <= sum / 30 + 1e-12);
}

TEST_CASE("self evaluation, ordering invariance and monotonicity") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> x(-8.0, 8.0), slope(-0.02, 0.02), noise(-1.2, 1.2);
  std::vector<LaneFrame> gt_frames, pred_frames;
  for (int f = 0; f < 20; ++f) {
    LaneFrame gt, pred;
    gt.frame_id = pred.frame_id = f;
    for (int i = 0; i < 4; ++i) {
      gt.lanes.push_back(polyline(x(rng), slope(rng)));
      const double dx = noise(rng);
      pred.lanes.push_back(with_x(gt.lanes.back(), [dx](double y) { return dx * (1.0 + y / 200.0); }));
    }
    gt_frames.push_back(gt);
    pred_frames.push_back(pred);
  }
  const MatchConfig cfg;
  const EvalResult self = evaluate_frames(gt_frames, gt_frames, cfg);
  CHECK(self.f1.f1 == 1.0);
  for (const auto& e : self.x_error) CHECK(e.value() == 0.0);
  CHECK(self.vis_iou.value() == 1.0);
  CHECK(self.chamfer_distance == 0.0);

  std::vector<LaneFrame> shuffled = pred_frames;
  for (auto& f : shuffled) std::reverse(f.lanes.begin(), f.lanes.end());
  std::reverse(shuffled.begin(), shuffled.end());
  const EvalResult a = evaluate_frames(pred_frames, gt_frames, cfg);
  const EvalResult b = evaluate_frames(shuffled, gt_frames, cfg);
  CHECK(a.tp == b.tp);
  CHECK(a.fp == b.fp);
  for (std::size_t i = 0; i < a.x_error.size(); ++i) CHECK(a.x_error[i].value_or(-1) == doctest::Approx(b.x_error[i].value_or(-1)));

  long prev = -1;
  for (double tau : {0.5, 1.0, 1.5, 2.0}) {
    MatchConfig c = cfg;
    c.point_threshold = tau;
    const long tp = evaluate_frames(pred_frames, gt_frames, c).tp;
    CHECK(tp >= prev);
    prev = tp;
  }

  // Split accumulation merges to the same totals.
  EvalAccumulator whole(cfg), left(cfg), right(cfg);
  for (int f = 0; f < 20; ++f) {
    whole.add_frame(pred_frames[f].lanes, gt_frames[f].lanes);
    (f % 2 ? left : right).add_frame(pred_frames[f].lanes, gt_frames[f].lanes);
  }
  right.merge(left);
  CHECK(whole.result().tp == right.result().tp);
  CHECK(whole.result().x_error[1].value_or(-1) == doctest::Approx(right.result().x_error[1].value_or(-1)));

  // Missing prediction frames count as misses.
  const EvalResult missing = evaluate_frames({}, gt_frames, cfg);
  CHECK(missing.fn == 80);
  CHECK(missing.f1.f1 == 0.0);
}
