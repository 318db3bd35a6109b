#pragma once

#include <deque>
#include <vector>

#include <Eigen/Core>

#include "lanestp/pose.hpp"
#include "lanestp/spline.hpp"

namespace lanestp {

/// Per-frame detector output feeding the memory. Embedding row i*M + j belongs
/// to control point j of lane i.
struct LanePredictions {
  std::vector<ControlPoints> lanes;
  Eigen::VectorXd confidences;
  Eigen::MatrixXd embeddings;

  int num_lanes() const { return static_cast<int>(lanes.size()); }
  int points_per_lane() const { return lanes.empty() ? 0 : static_cast<int>(lanes.front().rows()); }
};

/// Confidence per lane from an N x (K+1) probability matrix whose last column
/// is the background class: the largest non-background probability.
Eigen::VectorXd lane_confidences(const Eigen::Ref<const Eigen::MatrixXd>& class_probs);

/// One frame's retained entries, stored in the frame they were observed in.
struct MemoryBlock {
  int frame_index = 0;
  EgoPose pose;
  std::vector<int> lane_ids;   // index of the lane in its source frame
  Eigen::VectorXd confidences; // per retained lane
  Eigen::MatrixX4d points;     // (lanes * M) x 4
  Eigen::MatrixXd embeddings;  // (lanes * M) x C
  int points_per_lane = 0;

  int entry_count() const { return static_cast<int>(points.rows()); }
};

/// Memory entries propagated into the current frame, most recent block first.
struct MemoryView {
  Eigen::MatrixX4d points;
  Eigen::MatrixXd embeddings;
  std::vector<int> lane_ids;
  std::vector<int> frame_indices;
  std::vector<int> block_of_entry;

  Eigen::Index size() const { return points.rows(); }
};

/// FIFO of the most confident lanes of the last T frames.
class MemoryQueue {
 public:
  struct PushReport {
    int retained = 0;
    bool clamped = false;  // fewer lanes than the per-frame budget
  };

  explicit MemoryQueue(int capacity_frames = 3, int lanes_per_frame = 10);

  PushReport push_frame(const LanePredictions& predictions, const EgoPose& pose, int frame_index);

  /// Lazily propagates every block from its own pose into `current`.
  MemoryView view(const EgoPose& current) const;

  const std::deque<MemoryBlock>& blocks() const { return blocks_; }
  int capacity_frames() const { return capacity_frames_; }
  int lanes_per_frame() const { return lanes_per_frame_; }
  int frame_count() const { return static_cast<int>(blocks_.size()); }
  int entry_count() const;
  bool empty() const { return blocks_.empty(); }
  void clear() { blocks_.clear(); }

 private:
  int capacity_frames_;
  int lanes_per_frame_;
  std::deque<MemoryBlock> blocks_;  // front = most recent
};

}  // namespace lanestp
