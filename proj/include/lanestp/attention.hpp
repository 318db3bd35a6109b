#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "lanestp/spline.hpp"

namespace lanestp {

/// Boolean query x key relation matrix; true = attention allowed.
using AttentionMask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Flat query index of control point j on lane i for M points per lane.
constexpr int query_index(int lane, int point, int points_per_lane) {
  return lane * points_per_lane + point;
}

/// Same-line attention: query and key on the same lane.
AttentionMask sla_mask(int num_lanes, int points_per_lane);

/// Parallel-neighbour attention: for each query, the 2 points of every other
/// lane closest to the query's x-y orthogonal line (perpendicular to the local
/// tangent). Lanes must share one control point count.
AttentionMask pna_mask(const std::vector<ControlPoints>& lanes);

/// Temporal cross-attention: per current point, the m_tca memory points with
/// smallest 3D Euclidean distance (ties to the lower memory index).
AttentionMask tca_mask(const Eigen::Ref<const Eigen::MatrixX4d>& current,
                       const Eigen::Ref<const Eigen::MatrixX4d>& memory, int m_tca);

/// Stacks per-lane control points into (N*M) x 4 query positions.
Eigen::MatrixX4d stack_lanes(const std::vector<ControlPoints>& lanes);

/// Sinusoidal encoding of (x, y, z, v): each scalar is normalised into [0, 1]
/// by its range (clamped), scaled by 2*pi and expanded into `dim / 4`
/// interleaved sin/cos channels with periods temperature^(f / F).
struct PEConfig {
  int dim = 256;
  double temperature = 10000.0;
  Eigen::Vector4d lower{-20.0, 0.0, -5.0, 0.0};
  Eigen::Vector4d upper{20.0, 250.0, 5.0, 1.0};

  int frequencies() const { return dim / 8; }
  void validate() const;
};

Eigen::VectorXd positional_encoding(const Eigen::Vector4d& point, const PEConfig& cfg);
Eigen::MatrixXd positional_encodings(const Eigen::Ref<const Eigen::MatrixX4d>& points,
                                    const PEConfig& cfg);

/// Multi-head scaled dot-product attention restricted by `mask`. Rows without
/// any allowed key produce a zero vector.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> masked_attention(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& queries,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& keys,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& values,
    const AttentionMask& mask, int heads = 1) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index dim = queries.cols();
  if (heads < 1 || dim % heads != 0) {
    throw std::invalid_argument("embedding dimension must be divisible by the head count");
  }
  if (keys.cols() != dim || values.cols() != dim || keys.rows() != values.rows() ||
      mask.rows() != queries.rows() || mask.cols() != keys.rows()) {
    throw std::invalid_argument("masked_attention: dimension mismatch");
  }
  const Eigen::Index head_dim = dim / heads;
  const Scalar scale = Scalar(1) / std::sqrt(Scalar(head_dim));
  Matrix out = Matrix::Zero(queries.rows(), dim);
  Eigen::Matrix<Scalar, 1, Eigen::Dynamic> weights(keys.rows());

  for (int h = 0; h < heads; ++h) {
    const auto q = queries.middleCols(h * head_dim, head_dim);
    const auto k = keys.middleCols(h * head_dim, head_dim);
    const auto v = values.middleCols(h * head_dim, head_dim);
    for (Eigen::Index r = 0; r < queries.rows(); ++r) {
      Scalar best = -std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index c = 0; c < keys.rows(); ++c) {
        if (!mask(r, c)) continue;
        weights[c] = q.row(r).dot(k.row(c)) * scale;
        best = std::max(best, weights[c]);
      }
      if (!std::isfinite(best)) continue;
      Scalar total = 0;
      for (Eigen::Index c = 0; c < keys.rows(); ++c) {
        weights[c] = mask(r, c) ? std::exp(weights[c] - best) : Scalar(0);
        total += weights[c];
      }
      out.block(r, h * head_dim, 1, head_dim) = (weights / total) * v;
    }
  }
  return out;
}

/// sigmoid(u) * (hi - lo) + lo.
double prediction_head_scale(double u, double lo, double hi);

/// Fraction of active relations in the union of the three masks over
/// rows x (current keys + memory keys). An empty TCA mask means no memory.
double sparsity_ratio(const AttentionMask& sla, const AttentionMask& pna, const AttentionMask& tca);

/// Optional linear projections of one attention block (identity when empty).
struct AttentionWeights {
  Eigen::MatrixXd query, key, value, output;
};

struct StaWeights {
  AttentionWeights sla, pna, tca;
};

struct StaMasks {
  AttentionMask sla, pna, tca;
};

StaMasks build_sta_masks(const std::vector<ControlPoints>& lanes,
                         const Eigen::Ref<const Eigen::MatrixX4d>& memory_points, int m_tca);

/// One spatio-temporal attention block: SLA, then PNA, then TCA, each a masked
/// attention over position-encoded inputs followed by a residual add.
/// Maps (N*M) x C to (N*M) x C.
Eigen::MatrixXd sta_layer(const Eigen::MatrixXd& queries, const Eigen::MatrixX4d& query_points,
                          const Eigen::MatrixXd& memory_embeddings,
                          const Eigen::MatrixX4d& memory_points, const StaMasks& masks,
                          const PEConfig& pe, int heads = 1, const StaWeights& weights = {});

}  // namespace lanestp
