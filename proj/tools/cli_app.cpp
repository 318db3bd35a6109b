#include "cli_app.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "lanestp/attention.hpp"
#include "lanestp/autolabel.hpp"
#include "lanestp/frame_io.hpp"
#include "lanestp/losses.hpp"
#include "lanestp/memory_queue.hpp"
#include "lanestp/metrics.hpp"
#include "lanestp/spline.hpp"
#include "lanestp/synth.hpp"

namespace lanestp::cli {

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::string format_number(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string dump_lines(const std::vector<LaneFrame>& frames, const Json& config) {
  std::ostringstream ss;
  write_frames(ss, frames, config);
  return ss.str();
}

FrameFile load_frames(const std::string& path) {
  std::istringstream in(read_text_file(path));
  try {
    return read_frames(in);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------- synth

struct SynthOptions {
  std::string out_dir;
  int lanes = 4;
  double spacing = 3.5;
  std::vector<double> centerline{0.0, 0.0, 5e-4};
  double grade = 0.0;
  double crest_grade = 0.05;
  double crest_period = 400.0;
  int frames = 200;
  double speed = 10.0;
  double dt = 0.1;
  std::uint64_t seed = 0;
  double pixel_noise = 0.0;
  double camera_height = 1.5;
  double label_range = 250.0;
  int occlusion_start = -1;
  int occlusion_frames = 30;

  SceneSpec scene() const {
    SceneSpec s;
    s.num_lanes = lanes;
    s.lane_spacing = spacing;
    s.centerline = centerline;
    s.grade = grade;
    s.crest_grade = crest_grade;
    s.crest_period = crest_period;
    s.frames = frames;
    s.speed = speed;
    s.dt = dt;
    s.seed = seed;
    return s;
  }

  Json to_json() const {
    return Json{{"lanes", lanes},           {"spacing", spacing},
                {"centerline", centerline}, {"grade", grade},
                {"crest_grade", crest_grade}, {"crest_period", crest_period},
                {"frames", frames},         {"speed", speed},
                {"dt", dt},                 {"seed", seed},
                {"pixel_noise", pixel_noise}, {"camera_height", camera_height},
                {"label_range", label_range}, {"occlusion_start", occlusion_start},
                {"occlusion_frames", occlusion_frames}};
  }
};

// Vehicle-sized box on the ego path between 12 and 16.5 m ahead.
std::vector<std::vector<Obstacle>> occlusion_schedule(int frames, int start, int count) {
  std::vector<std::vector<Obstacle>> schedule(static_cast<std::size_t>(frames));
  if (start < 0) return schedule;
  for (int k = start; k < std::min(frames, start + count); ++k) {
    schedule[k].push_back({Eigen::Vector3d(-1.0, 12.0, 0.0), Eigen::Vector3d(1.0, 16.5, 1.6)});
  }
  return schedule;
}

int run_synth(const SynthOptions& o, std::ostream& out) {
  const World world = gen_scene(o.scene());
  const CameraModel camera = CameraModel::level(o.camera_height);
  const Json config = o.to_json();

  std::vector<LaneFrame> gt = ground_truth_frames(world, camera, o.label_range, 2.0);
  gt = simulate_occlusion(gt, occlusion_schedule(o.frames, o.occlusion_start, o.occlusion_frames));
  const auto detections = render_sequence(world, camera, o.pixel_noise, o.seed + 1);

  namespace fs = std::filesystem;
  fs::create_directories(o.out_dir);
  const fs::path dir(o.out_dir);
  write_text_file((dir / "gt.jsonl").string(), dump_lines(gt, config));
  write_text_file((dir / "trajectory.json").string(), trajectory_to_json(world.trajectory, config).dump(1) + "\n");
  write_text_file((dir / "camera.json").string(), camera_document(camera, config).dump(1) + "\n");
  std::ostringstream det;
  write_detections(det, detections, config);
  write_text_file((dir / "detections.jsonl").string(), det.str());

  out << Json{{"command", "synth"},
              {"frames", o.frames},
              {"lanes", o.lanes},
              {"files", {"gt.jsonl", "trajectory.json", "camera.json", "detections.jsonl"}}}
             .dump()
      << '\n';
  return 0;
}

// ------------------------------------------------------------ autolabel

struct AutolabelOptions {
  std::string trajectory, camera, detections, out;
  AutolabelConfig cfg;

  Json to_json() const {
    return Json{{"near_range", cfg.near_range},
                {"label_range", cfg.label_range},
                {"label_step", cfg.label_step},
                {"gate", cfg.tracker.gate},
                {"station_spacing", cfg.tracker.station_spacing},
                {"confirm_after", cfg.tracker.confirm_after},
                {"measurement_sigma", cfg.tracker.measurement_sigma},
                {"process_sigma", cfg.tracker.process_sigma}};
  }
};

int run_autolabel(const AutolabelOptions& o, std::ostream& out) {
  const Trajectory trajectory = trajectory_from_json(read_json_file(o.trajectory));
  const CameraModel camera = camera_from_document(read_json_file(o.camera));
  std::istringstream det_in(read_text_file(o.detections));
  const DetectionFile detections = read_detections(det_in);
  if (detections.frames.size() != trajectory.size()) {
    throw FormatError("detections hold " + std::to_string(detections.frames.size()) +
                      " frames but the trajectory has " + std::to_string(trajectory.size()) + " poses");
  }
  const auto labels = autolabel_sequence(trajectory, camera, detections.frames, o.cfg);
  write_text_file(o.out, dump_lines(labels, o.to_json()));
  std::size_t tracks = 0;
  for (const auto& f : labels) {
    for (const auto& l : f.lanes) tracks = std::max<std::size_t>(tracks, static_cast<std::size_t>(l.id) + 1);
  }
  out << Json{{"command", "autolabel"}, {"frames", labels.size()}, {"max_track_id_plus_one", tracks}}.dump()
      << '\n';
  return 0;
}

// ----------------------------------------------------------------- eval

struct EvalOptions {
  std::string pred, gt, out;
  MatchConfig cfg;

  Json to_json() const {
    return Json{{"point_threshold", cfg.point_threshold},
                {"match_fraction", cfg.match_fraction},
                {"y_min", cfg.y_min},
                {"y_max", cfg.y_max},
                {"y_step", cfg.y_step},
                {"bin_edges", cfg.bin_edges},
                {"chamfer_threshold", cfg.chamfer_threshold},
                {"visibility_threshold", cfg.visibility_threshold}};
  }
};

std::string bin_label(const MatchConfig& cfg, std::size_t b) {
  if (b == 0) return "near";
  if (b == 1) return "far";
  std::ostringstream ss;
  ss << cfg.bin_edges[b] << "-" << cfg.bin_edges[b + 1];
  return ss.str();
}

std::string eval_table(const EvalResult& r, const MatchConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> cols{{"F1", format_number(r.f1.f1)},
                                                        {"Precision", format_number(r.f1.precision)},
                                                        {"Recall", format_number(r.f1.recall)}};
  for (std::size_t b = 0; b < r.x_error.size(); ++b) cols.emplace_back("X-err " + bin_label(cfg, b), format_number(r.x_error[b]));
  for (std::size_t b = 0; b < r.z_error.size(); ++b) cols.emplace_back("Z-err " + bin_label(cfg, b), format_number(r.z_error[b]));
  cols.emplace_back("Vis-IoU", format_number(r.vis_iou));
  cols.emplace_back("CD-F1", format_number(r.chamfer_f1.f1));
  cols.emplace_back("CD", format_number(r.chamfer_distance));
  std::string head, row;
  for (const auto& [name, value] : cols) {
    const std::size_t w = std::max(name.size(), value.size()) + 2;
    head += std::string(w - name.size(), ' ') + name;
    row += std::string(w - value.size(), ' ') + value;
  }
  return head + "\n" + row + "\n";
}

int run_eval(const EvalOptions& o, std::ostream& out) {
  o.cfg.validate();
  const FrameFile pred = load_frames(o.pred);
  const FrameFile gt = load_frames(o.gt);
  const EvalResult r = evaluate_frames(pred.frames, gt.frames, o.cfg);
  Json x = Json::array(), z = Json::array();
  for (const auto& v : r.x_error) x.push_back(optional_json(v));
  for (const auto& v : r.z_error) z.push_back(optional_json(v));
  const Json report{{"schema_version", kSchemaVersion},
                    {"config", o.to_json()},
                    {"f1", r.f1.f1},
                    {"precision", r.f1.precision},
                    {"recall", r.f1.recall},
                    {"tp", r.tp},
                    {"fp", r.fp},
                    {"fn", r.fn},
                    {"bin_edges", r.bin_edges},
                    {"x_error", x},
                    {"z_error", z},
                    {"vis_iou", optional_json(r.vis_iou)},
                    {"chamfer", {{"f1", r.chamfer_f1.f1},
                                 {"precision", r.chamfer_f1.precision},
                                 {"recall", r.chamfer_f1.recall},
                                 {"distance", r.chamfer_distance}}}};
  if (!o.out.empty()) write_text_file(o.out, report.dump(1) + "\n");
  out << eval_table(r, o.cfg);
  return 0;
}

// --------------------------------------------------------------- spline

struct SplineOptions {
  std::string input, out;
  CurveConfig curve;
  bool samples = false;

  Json to_json() const {
    return Json{{"num_control_points", curve.num_control_points},
                {"y_start", curve.y_start},
                {"y_end", curve.y_end},
                {"num_samples", curve.num_samples},
                {"emit_samples", samples}};
  }
};

Json rows_json(const Eigen::MatrixX4d& m) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(Json::array({m(i, 0), m(i, 1), m(i, 2), m(i, 3)}));
  return a;
}

int run_spline(const SplineOptions& o, std::ostream& out) {
  o.curve.validate();
  const FrameFile file = load_frames(o.input);
  const BasisMatrix dense_basis = build_basis<double>(o.curve.num_control_points, uniform_args(o.curve.num_samples), 0);
  std::ostringstream text;
  text << Json{{"schema_version", kSchemaVersion}, {"kind", "header"}, {"config", o.to_json()}}.dump() << '\n';
  long fitted = 0, skipped = 0;
  for (const auto& frame : file.frames) {
    Json lanes = Json::array();
    for (const auto& lane : frame.lanes) {
      std::vector<Eigen::Index> keep;
      for (Eigen::Index i = 0; i < lane.points.rows(); ++i) {
        const double y = lane.points(i, kY);
        if (y >= o.curve.y_start && y <= o.curve.y_end) keep.push_back(i);
      }
      Eigen::MatrixX4d rows(static_cast<Eigen::Index>(keep.size()), 4);
      for (std::size_t i = 0; i < keep.size(); ++i) rows.row(Eigen::Index(i)) = lane.points.row(keep[i]);
      Json entry{{"id", lane.id}, {"category", lane.category}};
      try {
        const ControlPoints cp = fit_control_points(rows, o.curve);
        const BasisMatrix basis = build_basis<double>(o.curve.num_control_points, args_for_y(rows.col(kY), o.curve), 0);
        const ControlPoints fit = evaluate_curve(cp, basis);
        const double rms = std::sqrt(((fit.col(kX) - rows.col(kX)).squaredNorm() +
                                      (fit.col(kZ) - rows.col(kZ)).squaredNorm()) /
                                     static_cast<double>(rows.rows()));
        entry["control_points"] = rows_json(cp);
        entry["rms_xz"] = rms;
        if (o.samples) entry["samples"] = rows_json(evaluate_curve(cp, dense_basis));
        ++fitted;
      } catch (const std::invalid_argument& e) {
        entry["error"] = e.what();
        ++skipped;
      }
      lanes.push_back(std::move(entry));
    }
    text << Json{{"schema_version", kSchemaVersion}, {"frame_id", frame.frame_id}, {"lanes", std::move(lanes)}}.dump()
         << '\n';
  }
  write_text_file(o.out, text.str());
  out << Json{{"command", "spline"}, {"frames", file.frames.size()}, {"fitted", fitted}, {"skipped", skipped}}.dump()
      << '\n';
  return 0;
}

// ---------------------------------------------------------------- masks

struct MasksOptions {
  int lanes = 40;
  int points = 20;
  int memory_frames = 3;
  int memory_lanes = 10;
  int m_tca = 10;
  double ego_step = 1.0;
  std::uint64_t seed = 0;
  std::string out;

  Json to_json() const {
    return Json{{"lanes", lanes},         {"points", points}, {"memory_frames", memory_frames},
                {"memory_lanes", memory_lanes}, {"m_tca", m_tca}, {"ego_step", ego_step},
                {"seed", seed}};
  }
};

// Gently curved, laterally spread lanes with seeded offsets and curvature.
std::vector<ControlPoints> random_lanes(int n, int m, std::mt19937_64& rng) {
  CurveConfig curve;
  curve.num_control_points = m;
  const Eigen::VectorXd ys = control_y(curve);
  std::uniform_real_distribution<double> jitter(-0.2, 0.2), bend(-2e-4, 2e-4);
  std::vector<ControlPoints> lanes;
  for (int i = 0; i < n; ++i) {
    const double offset = n == 1 ? 0.0 : -19.0 + 38.0 * i / (n - 1) + jitter(rng);
    const double c = bend(rng);
    ControlPoints cp(m, 4);
    for (int j = 0; j < m; ++j) cp.row(j) << offset + c * ys[j] * ys[j], ys[j], 0.0, 1.0;
    lanes.push_back(std::move(cp));
  }
  return lanes;
}

std::pair<int, int> degree_range(const AttentionMask& mask) {
  if (mask.rows() == 0) return {0, 0};
  const Eigen::VectorXi deg = mask.cast<int>().rowwise().sum();
  return {deg.minCoeff(), deg.maxCoeff()};
}

int run_masks(const MasksOptions& o, std::ostream& out) {
  if (o.lanes < 2 || o.points < 4) throw UsageError("masks needs at least 2 lanes and 4 points");
  if (o.memory_frames < 0 || o.memory_lanes < 1 || o.m_tca < 1) throw UsageError("invalid memory parameters");
  std::mt19937_64 rng(o.seed);
  const std::vector<ControlPoints> lanes = random_lanes(o.lanes, o.points, rng);

  // Past frames see the same lanes from poses behind the current one.
  MemoryQueue queue(std::max(o.memory_frames, 1), o.memory_lanes);
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  for (int k = o.memory_frames; k >= 1; --k) {
    LanePredictions pred;
    const EgoPose past = EgoPose::from_translation(Eigen::Vector3d(0.0, -k * o.ego_step, 0.0));
    for (const auto& l : lanes) pred.lanes.push_back(propagate_points(l, EgoPose(), past));
    pred.confidences.resize(o.lanes);
    for (int i = 0; i < o.lanes; ++i) pred.confidences[i] = conf(rng);
    pred.embeddings = Eigen::MatrixXd::Zero(o.lanes * o.points, 1);
    queue.push_frame(pred, past, -k);
  }
  const MemoryView view = o.memory_frames > 0 ? queue.view(EgoPose()) : MemoryView{};

  const StaMasks masks = build_sta_masks(lanes, view.points, o.m_tca);
  const AttentionMask no_memory;
  const auto [sla_lo, sla_hi] = degree_range(masks.sla);
  const auto [pna_lo, pna_hi] = degree_range(masks.pna);
  const auto [tca_lo, tca_hi] = degree_range(masks.tca);
  const Json report{{"schema_version", kSchemaVersion},
                    {"config", o.to_json()},
                    {"queries", o.lanes * o.points},
                    {"memory_entries", view.size()},
                    {"degrees", {{"sla", {sla_lo, sla_hi}}, {"pna", {pna_lo, pna_hi}}, {"tca", {tca_lo, tca_hi}}}},
                    {"expected_degrees", {{"sla", o.points}, {"pna", 2 * (o.lanes - 1)},
                                          {"tca", std::min<Eigen::Index>(o.m_tca, view.size())}}},
                    {"sparsity", {{"current_frame", sparsity_ratio(masks.sla, masks.pna, no_memory)},
                                  {"with_memory", sparsity_ratio(masks.sla, masks.pna, masks.tca)}}}};
  if (!o.out.empty()) write_text_file(o.out, report.dump(1) + "\n");
  out << report.dump(1) << '\n';
  return 0;
}

// -------------------------------------------------------- temporal-demo

struct TemporalOptions {
  int frames = 100;
  int occlusion_start = 35;
  int occlusion_frames = 30;
  double alpha = 0.5;
  double perturbation = 0.3;
  double grade = 0.05;
  double range = 100.0;
  int memory_frames = 3;
  int memory_lanes = 10;
  std::uint64_t seed = 0;
  std::string out;

  Json to_json() const {
    return Json{{"frames", frames},
                {"occlusion_start", occlusion_start},
                {"occlusion_frames", occlusion_frames},
                {"alpha", alpha},
                {"perturbation", perturbation},
                {"grade", grade},
                {"range", range},
                {"memory_frames", memory_frames},
                {"memory_lanes", memory_lanes},
                {"seed", seed}};
  }
};

std::vector<Eigen::MatrixX4d> frame_curves(const LaneFrame& frame) {
  std::vector<Eigen::MatrixX4d> out;
  for (const auto& l : frame.lanes) out.push_back(l.points);
  return out;
}

int run_temporal(const TemporalOptions& o, std::ostream& out) {
  if (o.frames < 2) throw UsageError("temporal-demo needs at least 2 frames");
  if (o.alpha < 0.0 || o.alpha > 1.0) throw UsageError("alpha must lie in [0, 1]");
  if (!(o.range > 0.0) || o.perturbation < 0.0) throw UsageError("invalid range or perturbation");
  SceneSpec spec;
  spec.centerline = {0.0};
  spec.grade = o.grade;
  spec.crest_grade = 0.0;
  spec.frames = o.frames;
  spec.seed = o.seed;
  const World world = gen_scene(spec);
  const CameraModel camera = CameraModel::level(1.5);
  const auto schedule = occlusion_schedule(o.frames, o.occlusion_start, o.occlusion_frames);
  const std::vector<LaneFrame> gt = simulate_occlusion(ground_truth_frames(world, camera, o.range, 2.0), schedule);

  const int grid = static_cast<int>(std::floor(o.range / 2.0 + 1e-9)) + 1;
  const Eigen::VectorXd y_grid = Eigen::VectorXd::LinSpaced(grid, 0.0, 2.0 * (grid - 1));
  EmaState clean_state = make_ema_state(y_grid, o.alpha);
  EmaState noisy_state = make_ema_state(y_grid, o.alpha);
  MemoryQueue queue(o.memory_frames, o.memory_lanes);
  CurveConfig curve;
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::ostringstream trace;
  trace << Json{{"schema_version", kSchemaVersion}, {"kind", "header"}, {"config", o.to_json()}}.dump() << '\n';
  double clean_sum = 0.0, noisy_sum = 0.0, clean_max = 0.0;
  for (int k = 0; k < o.frames; ++k) {
    const LaneFrame& frame = gt[k];
    for (const auto& l : frame.lanes) {
      if (l.points.rows() != grid) throw std::runtime_error("ground truth does not cover the demo grid");
    }
    const std::vector<Eigen::MatrixX4d> clean = frame_curves(frame);
    std::vector<Eigen::MatrixX4d> noisy = clean;
    const bool occluded = !schedule[k].empty();
    long hidden = 0;
    for (auto& lane : noisy) {
      for (Eigen::Index i = 0; i < lane.rows(); ++i) {
        if (lane(i, kV) != 0.0) continue;
        ++hidden;
        lane(i, kX) += o.perturbation * noise(rng);
        lane(i, kZ) += o.perturbation * noise(rng);
      }
    }

    clean_state = ema_update(clean_state, clean, frame.ego_pose);
    noisy_state = ema_update(noisy_state, noisy, frame.ego_pose);
    const double clean_loss = temporal_consistency_loss(clean, clean_state);
    const double noisy_loss = temporal_consistency_loss(noisy, noisy_state);
    clean_sum += clean_loss;
    noisy_sum += noisy_loss;
    clean_max = std::max(clean_max, clean_loss);

    LanePredictions pred;
    Eigen::VectorXd conf(static_cast<Eigen::Index>(clean.size()));
    for (std::size_t i = 0; i < clean.size(); ++i) {
      std::vector<Eigen::Index> rows;
      for (Eigen::Index g = 0; g < grid; ++g) {
        if (y_grid[g] >= curve.y_start && y_grid[g] <= curve.y_end) rows.push_back(g);
      }
      Eigen::MatrixX4d dense(static_cast<Eigen::Index>(rows.size()), 4);
      for (std::size_t r = 0; r < rows.size(); ++r) dense.row(Eigen::Index(r)) = noisy[i].row(rows[r]);
      pred.lanes.push_back(fit_control_points(dense, curve));
      conf[Eigen::Index(i)] = dense.col(kV).mean();
    }
    pred.confidences = conf;
    pred.embeddings = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(clean.size()) * curve.num_control_points, 1);
    if (o.memory_frames > 0) queue.push_frame(pred, frame.ego_pose, k);
    const Eigen::Index memory = o.memory_frames > 0 ? queue.view(frame.ego_pose).size() : 0;

    trace << Json{{"frame", k},
                  {"occluded", occluded},
                  {"hidden_points", hidden},
                  {"memory_entries", memory},
                  {"l_temp_clean", clean_loss},
                  {"l_temp_perturbed", noisy_loss}}
                 .dump()
          << '\n';
  }
  if (!o.out.empty()) write_text_file(o.out, trace.str());
  out << Json{{"command", "temporal-demo"},
              {"frames", o.frames},
              {"l_temp_clean_total", clean_sum},
              {"l_temp_perturbed_total", noisy_sum},
              {"l_temp_clean_max", clean_max},
              {"perturbed_exceeds_clean", noisy_sum > clean_sum}}
             .dump()
      << '\n';
  return 0;
}

void print_error(std::ostream& err, const std::string& kind, const std::string& message) {
  err << Json{{"error", {{"type", kind}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse spatio-temporal lane detection toolkit"};
  app.set_config("--config", "", "TOML/INI configuration file; command line flags take precedence");
  app.require_subcommand(1);

  SynthOptions synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic scene: ground truth, trajectory, camera, detections");
  s->add_option("--out-dir", synth.out_dir, "Output directory")->required();
  s->add_option("--lanes", synth.lanes, "Number of lanes")->capture_default_str();
  s->add_option("--spacing", synth.spacing, "Lane spacing in metres")->capture_default_str();
  s->add_option("--centerline", synth.centerline, "Centerline x(y) polynomial coefficients, constant term first")
      ->capture_default_str();
  s->add_option("--grade", synth.grade, "Constant longitudinal grade")->capture_default_str();
  s->add_option("--crest-grade", synth.crest_grade, "Peak grade of the periodic crest profile")->capture_default_str();
  s->add_option("--crest-period", synth.crest_period, "Crest period in metres")->capture_default_str();
  s->add_option("--frames", synth.frames, "Sequence length")->capture_default_str();
  s->add_option("--speed", synth.speed, "Ego speed in m/s")->capture_default_str();
  s->add_option("--dt", synth.dt, "Frame interval in seconds")->capture_default_str();
  s->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  s->add_option("--pixel-noise", synth.pixel_noise, "Detection noise sigma in pixels")->capture_default_str();
  s->add_option("--camera-height", synth.camera_height, "Camera height in metres")->capture_default_str();
  s->add_option("--label-range", synth.label_range, "Ground-truth range ahead in metres")->capture_default_str();
  s->add_option("--occlusion-start", synth.occlusion_start, "First frame with an occluding vehicle (-1: none)")
      ->capture_default_str();
  s->add_option("--occlusion-frames", synth.occlusion_frames, "Number of occluded frames")->capture_default_str();

  AutolabelOptions al;
  auto* a = app.add_subcommand("autolabel", "Lift 2D detections onto the trajectory surface and emit 3D labels");
  a->add_option("--trajectory", al.trajectory, "Trajectory JSON")->required()->check(CLI::ExistingFile);
  a->add_option("--camera", al.camera, "Camera JSON")->required()->check(CLI::ExistingFile);
  a->add_option("--detections", al.detections, "Detections JSON-Lines")->required()->check(CLI::ExistingFile);
  a->add_option("--out", al.out, "Output labels JSON-Lines")->required();
  a->add_option("--near-range", al.cfg.near_range, "Lifting range in metres")->capture_default_str();
  a->add_option("--label-range", al.cfg.label_range, "Label range in metres")->capture_default_str();
  a->add_option("--label-step", al.cfg.label_step, "Label y spacing in metres")->capture_default_str();
  a->add_option("--gate", al.cfg.tracker.gate, "Association gate in metres")->capture_default_str();
  a->add_option("--station-spacing", al.cfg.tracker.station_spacing, "Track station spacing in metres")
      ->capture_default_str();
  a->add_option("--confirm-after", al.cfg.tracker.confirm_after, "Consecutive hits to confirm a track")
      ->capture_default_str();
  a->add_option("--measurement-sigma", al.cfg.tracker.measurement_sigma, "Measurement noise in metres")
      ->capture_default_str();
  a->add_option("--process-sigma", al.cfg.tracker.process_sigma, "Process noise per frame in metres")
      ->capture_default_str();

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Evaluate predicted against ground-truth frames");
  e->add_option("--pred", ev.pred, "Predicted frames JSON-Lines")->required()->check(CLI::ExistingFile);
  e->add_option("--gt", ev.gt, "Ground-truth frames JSON-Lines")->required()->check(CLI::ExistingFile);
  e->add_option("--out", ev.out, "JSON report path");
  e->add_option("--threshold", ev.cfg.point_threshold, "Point match distance in metres")->capture_default_str();
  e->add_option("--match-fraction", ev.cfg.match_fraction, "Required matched fraction")->capture_default_str();
  e->add_option("--chamfer-threshold", ev.cfg.chamfer_threshold, "Chamfer match threshold in metres")
      ->capture_default_str();
  e->add_option("--bins", ev.cfg.bin_edges, "Distance bin edges in metres")->capture_default_str();

  SplineOptions sp;
  auto* c = app.add_subcommand("spline", "Fit Catmull-Rom control points to lane polylines");
  c->add_option("--input", sp.input, "Frames JSON-Lines")->required()->check(CLI::ExistingFile);
  c->add_option("--out", sp.out, "Output JSON-Lines")->required();
  c->add_option("--control-points", sp.curve.num_control_points, "Control points per lane")->capture_default_str();
  c->add_option("--y-start", sp.curve.y_start, "First control point y")->capture_default_str();
  c->add_option("--y-end", sp.curve.y_end, "Last control point y")->capture_default_str();
  c->add_option("--samples", sp.curve.num_samples, "Dense samples per curve")->capture_default_str();
  c->add_flag("--emit-samples", sp.samples, "Include dense samples in the output");

  MasksOptions mk;
  auto* m = app.add_subcommand("masks", "Report attention mask degrees and sparsity");
  m->add_option("--lanes", mk.lanes, "Lanes N")->capture_default_str();
  m->add_option("--points", mk.points, "Control points per lane M")->capture_default_str();
  m->add_option("--memory-frames", mk.memory_frames, "Memory frames T (0: none)")->capture_default_str();
  m->add_option("--memory-lanes", mk.memory_lanes, "Lanes kept per memory frame")->capture_default_str();
  m->add_option("--m-tca", mk.m_tca, "Memory neighbours per query")->capture_default_str();
  m->add_option("--ego-step", mk.ego_step, "Ego advance per frame in metres")->capture_default_str();
  m->add_option("--seed", mk.seed, "Random seed")->capture_default_str();
  m->add_option("--out", mk.out, "JSON report path");

  TemporalOptions td;
  auto* t = app.add_subcommand("temporal-demo", "Memory queue and EMA temporal loss over a synthetic sequence");
  t->add_option("--frames", td.frames, "Sequence length")->capture_default_str();
  t->add_option("--occlusion-start", td.occlusion_start, "First occluded frame (-1: none)")->capture_default_str();
  t->add_option("--occlusion-frames", td.occlusion_frames, "Occluded frames")->capture_default_str();
  t->add_option("--alpha", td.alpha, "EMA smoothing factor")->capture_default_str();
  t->add_option("--perturbation", td.perturbation, "Noise sigma on occluded predictions in metres")
      ->capture_default_str();
  t->add_option("--grade", td.grade, "Road grade")->capture_default_str();
  t->add_option("--range", td.range, "Prediction range in metres")->capture_default_str();
  t->add_option("--memory-frames", td.memory_frames, "Memory frames T")->capture_default_str();
  t->add_option("--memory-lanes", td.memory_lanes, "Lanes kept per memory frame")->capture_default_str();
  t->add_option("--seed", td.seed, "Random seed")->capture_default_str();
  t->add_option("--out", td.out, "Per-frame trace JSON-Lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& ex) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& ex) {
    print_error(err, "usage", ex.what());
    return 2;
  }

  try {
    if (*s) return run_synth(synth, out);
    if (*a) return run_autolabel(al, out);
    if (*e) return run_eval(ev, out);
    if (*c) return run_spline(sp, out);
    if (*m) return run_masks(mk, out);
    if (*t) return run_temporal(td, out);
  } catch (const UsageError& ex) {
    print_error(err, "usage", ex.what());
    return 2;
  } catch (const FormatError& ex) {
    print_error(err, "format", ex.what());
    return 3;
  } catch (const std::invalid_argument& ex) {
    print_error(err, "invalid_argument", ex.what());
    return 3;
  } catch (const std::exception& ex) {
    print_error(err, "runtime", ex.what());
    return 1;
  }
  return 2;
}

}  // namespace lanestp::cli
