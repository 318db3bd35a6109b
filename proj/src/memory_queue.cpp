#include "lanestp/memory_queue.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace lanestp {

Eigen::VectorXd lane_confidences(const Eigen::Ref<const Eigen::MatrixXd>& class_probs) {
  if (class_probs.cols() < 2) {
    throw std::invalid_argument("class probabilities need at least one category plus background");
  }
  return class_probs.leftCols(class_probs.cols() - 1).rowwise().maxCoeff();
}

MemoryQueue::MemoryQueue(int capacity_frames, int lanes_per_frame)
    : capacity_frames_(capacity_frames), lanes_per_frame_(lanes_per_frame) {
  if (capacity_frames < 1) throw std::invalid_argument("memory capacity must be >= 1 frame");
  if (lanes_per_frame < 1) throw std::invalid_argument("memory lanes per frame must be >= 1");
}

MemoryQueue::PushReport MemoryQueue::push_frame(const LanePredictions& predictions,
                                                const EgoPose& pose, int frame_index) {
  const int n = predictions.num_lanes();
  const int m = predictions.points_per_lane();
  if (predictions.confidences.size() != n) {
    throw std::invalid_argument("one confidence per lane required");
  }
  if (n > 0 && predictions.embeddings.rows() != static_cast<Eigen::Index>(n) * m) {
    throw std::invalid_argument("embedding rows must equal lanes * control points");
  }
  for (const auto& lane : predictions.lanes) {
    if (lane.rows() != m) throw std::invalid_argument("all lanes need the same control point count");
  }

  PushReport report;
  report.clamped = n < lanes_per_frame_;
  report.retained = std::min(n, lanes_per_frame_);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return predictions.confidences[a] > predictions.confidences[b];
  });
  order.resize(report.retained);

  MemoryBlock block;
  block.frame_index = frame_index;
  block.pose = pose;
  block.points_per_lane = m;
  block.lane_ids = order;
  block.confidences.resize(report.retained);
  block.points.resize(static_cast<Eigen::Index>(report.retained) * m, 4);
  block.embeddings.resize(static_cast<Eigen::Index>(report.retained) * m,
                          predictions.embeddings.cols());
  for (int r = 0; r < report.retained; ++r) {
    const int lane = order[r];
    block.confidences[r] = predictions.confidences[lane];
    block.points.middleRows(r * m, m) = predictions.lanes[lane];
    block.embeddings.middleRows(r * m, m) = predictions.embeddings.middleRows(lane * m, m);
  }

  blocks_.push_front(std::move(block));
  while (static_cast<int>(blocks_.size()) > capacity_frames_) blocks_.pop_back();
  return report;
}

int MemoryQueue::entry_count() const {
  int total = 0;
  for (const auto& b : blocks_) total += b.entry_count();
  return total;
}

MemoryView MemoryQueue::view(const EgoPose& current) const {
  MemoryView out;
  const int total = entry_count();
  const Eigen::Index dim = blocks_.empty() ? 0 : blocks_.front().embeddings.cols();
  out.points.resize(total, 4);
  out.embeddings.resize(total, dim);
  Eigen::Index row = 0;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const MemoryBlock& block = blocks_[b];
    const int count = block.entry_count();
    if (count == 0) continue;
    if (block.embeddings.cols() != dim) {
      throw std::logic_error("memory blocks disagree on embedding dimension");
    }
    out.points.middleRows(row, count) = propagate_points(block.points, block.pose, current);
    out.embeddings.middleRows(row, count) = block.embeddings;
    for (int e = 0; e < count; ++e) {
      out.lane_ids.push_back(block.lane_ids[e / block.points_per_lane]);
      out.frame_indices.push_back(block.frame_index);
      out.block_of_entry.push_back(static_cast<int>(b));
    }
    row += count;
  }
  return out;
}

}  // namespace lanestp
