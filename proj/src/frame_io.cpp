#include "lanestp/frame_io.hpp"

#include <fstream>
#include <sstream>

namespace lanestp {

namespace {

template <typename T>
T get(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(std::string("field '") + key + "' has the wrong type");
  }
}

const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw FormatError(std::string("missing field '") + key + "'");
  return j.at(key);
}

bool is_header(const Json& j) { return j.is_object() && j.value("kind", std::string()) == "header"; }

// Parses non-empty lines; the header, if first, goes to `config`.
template <typename F>
void for_each_record(std::istream& in, Json& config, F&& record) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError("line " + std::to_string(number) + ": invalid JSON");
    }
    try {
      check_schema(j, "record");
      if (is_header(j)) {
        config = j.contains("config") ? j.at("config") : Json::object();
        continue;
      }
      record(j);
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(number) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw FormatError("line " + std::to_string(number) + ": " + e.what());
    }
  }
}

Json header(const Json& config) {
  return Json{{"schema_version", kSchemaVersion}, {"kind", "header"}, {"config", config}};
}

}  // namespace

void check_schema(const Json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("schema_version")) {
    throw FormatError(what + " has no schema_version");
  }
  const Json& v = j.at("schema_version");
  if (!v.is_number_integer() || v.get<int>() != kSchemaVersion) {
    throw FormatError(what + " schema_version " + v.dump() + " is not supported (expected " +
                      std::to_string(kSchemaVersion) + ")");
  }
}

Json pose_to_json(const EgoPose& pose) {
  Json a = Json::array();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) a.push_back(pose.matrix()(r, c));
  }
  return a;
}

EgoPose pose_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 16) throw FormatError("pose must be 16 numbers");
  Eigen::Matrix4d m;
  for (int i = 0; i < 16; ++i) {
    if (!j[i].is_number()) throw FormatError("pose entries must be numbers");
    m(i / 4, i % 4) = j[i].get<double>();
  }
  return EgoPose(m);
}

Json camera_to_json(const CameraModel& camera) {
  return Json{{"fx", camera.fx},         {"fy", camera.fy},
              {"cx", camera.cx},         {"cy", camera.cy},
              {"width", camera.width},   {"height", camera.height},
              {"extrinsic", pose_to_json(camera.extrinsic)}};
}

CameraModel camera_from_json(const Json& j) {
  CameraModel cam;
  cam.fx = get<double>(j, "fx");
  cam.fy = get<double>(j, "fy");
  cam.cx = get<double>(j, "cx");
  cam.cy = get<double>(j, "cy");
  cam.width = j.contains("width") ? get<int>(j, "width") : cam.width;
  cam.height = j.contains("height") ? get<int>(j, "height") : cam.height;
  cam.extrinsic = pose_from_json(field(j, "extrinsic"));
  cam.validate();
  return cam;
}

Json frame_to_json(const LaneFrame& frame) {
  Json lanes = Json::array();
  for (const auto& lane : frame.lanes) {
    Json points = Json::array();
    for (Eigen::Index i = 0; i < lane.points.rows(); ++i) {
      points.push_back(Json::array({lane.points(i, 0), lane.points(i, 1), lane.points(i, 2), lane.points(i, 3)}));
    }
    lanes.push_back(Json{{"id", lane.id}, {"category", lane.category}, {"points", std::move(points)}});
  }
  return Json{{"schema_version", kSchemaVersion},
              {"frame_id", frame.frame_id},
              {"timestamp_s", frame.timestamp_s},
              {"ego_pose", pose_to_json(frame.ego_pose)},
              {"camera", camera_to_json(frame.camera)},
              {"lanes", std::move(lanes)}};
}

LaneFrame frame_from_json(const Json& j) {
  LaneFrame frame;
  frame.frame_id = get<int>(j, "frame_id");
  frame.timestamp_s = get<double>(j, "timestamp_s");
  frame.ego_pose = pose_from_json(field(j, "ego_pose"));
  frame.camera = camera_from_json(field(j, "camera"));
  const Json& lanes = field(j, "lanes");
  if (!lanes.is_array()) throw FormatError("lanes must be an array");
  for (const auto& jl : lanes) {
    Lane lane;
    lane.id = get<int>(jl, "id");
    lane.category = get<int>(jl, "category");
    const Json& pts = field(jl, "points");
    if (!pts.is_array()) throw FormatError("points must be an array");
    lane.points.resize(static_cast<Eigen::Index>(pts.size()), 4);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (!pts[i].is_array() || pts[i].size() != 4) throw FormatError("points must be [x, y, z, v]");
      for (int c = 0; c < 4; ++c) {
        if (!pts[i][c].is_number()) throw FormatError("point coordinates must be numbers");
        lane.points(Eigen::Index(i), c) = pts[i][c].get<double>();
      }
    }
    frame.lanes.push_back(std::move(lane));
  }
  return frame;
}

void write_frames(std::ostream& out, const std::vector<LaneFrame>& frames, const Json& config) {
  out << header(config).dump() << '\n';
  for (const auto& f : frames) out << frame_to_json(f).dump() << '\n';
}

FrameFile read_frames(std::istream& in) {
  FrameFile file;
  for_each_record(in, file.config, [&](const Json& j) { file.frames.push_back(frame_from_json(j)); });
  return file;
}

void write_detections(std::ostream& out, const std::vector<std::vector<Detection2D>>& frames,
                      const Json& config) {
  out << header(config).dump() << '\n';
  for (std::size_t k = 0; k < frames.size(); ++k) {
    Json dets = Json::array();
    for (const auto& d : frames[k]) {
      Json pixels = Json::array();
      for (Eigen::Index i = 0; i < d.pixels.rows(); ++i) pixels.push_back(Json::array({d.pixels(i, 0), d.pixels(i, 1)}));
      dets.push_back(Json{{"category", d.category}, {"pixels", std::move(pixels)}});
    }
    out << Json{{"schema_version", kSchemaVersion}, {"frame_id", k}, {"detections", std::move(dets)}}.dump()
        << '\n';
  }
}

DetectionFile read_detections(std::istream& in) {
  DetectionFile file;
  for_each_record(in, file.config, [&](const Json& j) {
    const int id = get<int>(j, "frame_id");
    if (id != static_cast<int>(file.frames.size())) throw FormatError("detection frames must be consecutive from 0");
    std::vector<Detection2D> dets;
    const Json& arr = field(j, "detections");
    if (!arr.is_array()) throw FormatError("detections must be an array");
    for (const auto& jd : arr) {
      Detection2D d;
      d.category = get<int>(jd, "category");
      const Json& px = field(jd, "pixels");
      if (!px.is_array()) throw FormatError("pixels must be an array");
      d.pixels.resize(static_cast<Eigen::Index>(px.size()), 2);
      for (std::size_t i = 0; i < px.size(); ++i) {
        if (!px[i].is_array() || px[i].size() != 2 || !px[i][0].is_number() || !px[i][1].is_number()) {
          throw FormatError("pixels must be [u, v] pairs");
        }
        d.pixels(Eigen::Index(i), 0) = px[i][0].get<double>();
        d.pixels(Eigen::Index(i), 1) = px[i][1].get<double>();
      }
      dets.push_back(std::move(d));
    }
    file.frames.push_back(std::move(dets));
  });
  return file;
}

Json trajectory_to_json(const Trajectory& trajectory, const Json& config) {
  Json poses = Json::array();
  for (const auto& p : trajectory) {
    poses.push_back(Json{{"timestamp_s", p.timestamp_s}, {"pose", pose_to_json(p.pose)}});
  }
  return Json{{"schema_version", kSchemaVersion}, {"config", config}, {"poses", std::move(poses)}};
}

Trajectory trajectory_from_json(const Json& j) {
  check_schema(j, "trajectory");
  const Json& poses = field(j, "poses");
  if (!poses.is_array()) throw FormatError("poses must be an array");
  Trajectory out;
  for (const auto& jp : poses) out.push_back({get<double>(jp, "timestamp_s"), pose_from_json(field(jp, "pose"))});
  return out;
}

Json camera_document(const CameraModel& camera, const Json& config) {
  Json j{{"schema_version", kSchemaVersion}, {"config", config}};
  const Json cam = camera_to_json(camera);
  for (const auto& [k, v] : cam.items()) j[k] = v;
  return j;
}

CameraModel camera_from_document(const Json& j) {
  check_schema(j, "camera");
  return camera_from_json(j);
}

Json read_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    throw FormatError(path + ": invalid JSON");
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace lanestp
