#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "lanestp/autolabel.hpp"
#include "lanestp/frame.hpp"

namespace lanestp {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Thrown for malformed files and schema mismatches.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Json pose_to_json(const EgoPose& pose);  // 16 row-major numbers
EgoPose pose_from_json(const Json& j);

Json camera_to_json(const CameraModel& camera);
CameraModel camera_from_json(const Json& j);

Json frame_to_json(const LaneFrame& frame);
LaneFrame frame_from_json(const Json& j);

/// JSON-Lines stream: an optional header line {"schema_version", "kind":
/// "header", "config"} followed by one object per record.
struct FrameFile {
  Json config = Json::object();
  std::vector<LaneFrame> frames;
};

void write_frames(std::ostream& out, const std::vector<LaneFrame>& frames, const Json& config);
FrameFile read_frames(std::istream& in);

struct DetectionFile {
  Json config = Json::object();
  std::vector<std::vector<Detection2D>> frames;
};

void write_detections(std::ostream& out, const std::vector<std::vector<Detection2D>>& frames,
                      const Json& config);
DetectionFile read_detections(std::istream& in);

Json trajectory_to_json(const Trajectory& trajectory, const Json& config);
Trajectory trajectory_from_json(const Json& j);

/// Full document for a camera file, with schema version and config.
Json camera_document(const CameraModel& camera, const Json& config);
CameraModel camera_from_document(const Json& j);

/// Throws FormatError unless j["schema_version"] equals kSchemaVersion.
void check_schema(const Json& j, const std::string& what);

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace lanestp
