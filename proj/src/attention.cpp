#include "lanestp/attention.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>

namespace lanestp {

AttentionMask sla_mask(int num_lanes, int points_per_lane) {
  if (num_lanes < 1 || points_per_lane < 1) throw std::invalid_argument("sla_mask: N, M must be >= 1");
  const int q = num_lanes * points_per_lane;
  AttentionMask mask = AttentionMask::Constant(q, q, false);
  for (int i = 0; i < num_lanes; ++i) {
    mask.block(i * points_per_lane, i * points_per_lane, points_per_lane, points_per_lane).setConstant(true);
  }
  return mask;
}

Eigen::MatrixX4d stack_lanes(const std::vector<ControlPoints>& lanes) {
  const Eigen::Index m = lanes.empty() ? 0 : lanes.front().rows();
  Eigen::MatrixX4d out(static_cast<Eigen::Index>(lanes.size()) * m, 4);
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    if (lanes[i].rows() != m) throw std::invalid_argument("lanes must share one control point count");
    out.middleRows(static_cast<Eigen::Index>(i) * m, m) = lanes[i];
  }
  return out;
}

namespace {

// Unit x-y tangents at the control points.
Eigen::MatrixX2d control_tangents(const ControlPoints& lane) {
  const Eigen::Index m = lane.rows();
  Eigen::MatrixX2d d(m, 2);
  if (m >= 4) {
    const BasisMatrix b1 = build_basis<double>(static_cast<int>(m), knot_args(static_cast<int>(m)), 1);
    const Eigen::MatrixX4d deriv = evaluate_curve(lane, b1);
    d.col(0) = deriv.col(kX);
    d.col(1) = deriv.col(kY);
  } else {
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::Index a = std::max<Eigen::Index>(j - 1, 0), b = std::min<Eigen::Index>(j + 1, m - 1);
      d(j, 0) = lane(b, kX) - lane(a, kX);
      d(j, 1) = lane(b, kY) - lane(a, kY);
    }
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    const double len = d.row(j).norm();
    // Degenerate tangent: the orthogonal line is the constant-y line.
    if (len < 1e-12) d.row(j) << 0.0, 1.0;
    else d.row(j) /= len;
  }
  return d;
}

// Indices of the k smallest values, ties to the lower index.
std::vector<int> smallest_k(const Eigen::Ref<const Eigen::VectorXd>& values, int k) {
  std::vector<int> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  k = std::min<int>(k, static_cast<int>(idx.size()));
  std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
    return values[a] < values[b] || (values[a] == values[b] && a < b);
  });
  idx.resize(k);
  return idx;
}

}  // namespace

AttentionMask pna_mask(const std::vector<ControlPoints>& lanes) {
  const int n = static_cast<int>(lanes.size());
  const Eigen::MatrixX4d points = stack_lanes(lanes);
  const int m = n == 0 ? 0 : static_cast<int>(lanes.front().rows());
  AttentionMask mask = AttentionMask::Constant(points.rows(), points.rows(), false);
  if (n < 2) return mask;

  std::vector<Eigen::MatrixX2d> tangents;
  tangents.reserve(n);
  for (const auto& lane : lanes) tangents.push_back(control_tangents(lane));

  Eigen::VectorXd distance(m);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const Eigen::Vector2d origin(lanes[i](j, kX), lanes[i](j, kY));
      const Eigen::Vector2d t = tangents[i].row(j).transpose();
      for (int other = 0; other < n; ++other) {
        if (other == i) continue;
        // Distance to the orthogonal line = |projection onto the tangent|.
        for (int p = 0; p < m; ++p) {
          const Eigen::Vector2d q(lanes[other](p, kX), lanes[other](p, kY));
          distance[p] = std::abs((q - origin).dot(t));
        }
        for (int p : smallest_k(distance, 2)) {
          mask(query_index(i, j, m), query_index(other, p, m)) = true;
        }
      }
    }
  }
  return mask;
}

AttentionMask tca_mask(const Eigen::Ref<const Eigen::MatrixX4d>& current,
                       const Eigen::Ref<const Eigen::MatrixX4d>& memory, int m_tca) {
  if (m_tca < 0) throw std::invalid_argument("M_TCA must be non-negative");
  AttentionMask mask = AttentionMask::Constant(current.rows(), memory.rows(), false);
  if (memory.rows() == 0) return mask;
  Eigen::VectorXd distance(memory.rows());
  for (Eigen::Index r = 0; r < current.rows(); ++r) {
    distance = (memory.leftCols<3>().rowwise() - current.row(r).leftCols<3>()).rowwise().norm();
    for (int c : smallest_k(distance, m_tca)) mask(r, c) = true;
  }
  return mask;
}

void PEConfig::validate() const {
  if (dim <= 0 || dim % 8 != 0) {
    throw std::invalid_argument("PE dimension must be a positive multiple of 8 (sin/cos x 4 scalars)");
  }
  if (!(temperature > 0.0)) throw std::invalid_argument("PE temperature must be positive");
  if (!((upper - lower).array() > 0.0).all()) throw std::invalid_argument("PE ranges must be non-empty");
}

Eigen::VectorXd positional_encoding(const Eigen::Vector4d& point, const PEConfig& cfg) {
  cfg.validate();
  const int freqs = cfg.frequencies();
  const int block = 2 * freqs;
  Eigen::VectorXd out(cfg.dim);
  for (int d = 0; d < 4; ++d) {
    const double u = std::clamp((point[d] - cfg.lower[d]) / (cfg.upper[d] - cfg.lower[d]), 0.0, 1.0);
    const double pos = u * 2.0 * std::numbers::pi;
    for (int f = 0; f < freqs; ++f) {
      const double arg = pos / std::pow(cfg.temperature, static_cast<double>(f) / freqs);
      out[d * block + 2 * f] = std::sin(arg);
      out[d * block + 2 * f + 1] = std::cos(arg);
    }
  }
  return out;
}

Eigen::MatrixXd positional_encodings(const Eigen::Ref<const Eigen::MatrixX4d>& points,
                                    const PEConfig& cfg) {
  Eigen::MatrixXd out(points.rows(), cfg.dim);
  for (Eigen::Index r = 0; r < points.rows(); ++r) {
    out.row(r) = positional_encoding(Eigen::Vector4d(points.row(r).transpose()), cfg).transpose();
  }
  return out;
}

double prediction_head_scale(double u, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("prediction range requires lo < hi");
  return (1.0 / (1.0 + std::exp(-u))) * (hi - lo) + lo;
}

double sparsity_ratio(const AttentionMask& sla, const AttentionMask& pna, const AttentionMask& tca) {
  if (sla.rows() != pna.rows() || sla.cols() != pna.cols()) {
    throw std::invalid_argument("SLA and PNA masks must share their shape");
  }
  const Eigen::Index rows = sla.rows();
  const bool has_memory = tca.size() > 0;
  if (has_memory && tca.rows() != rows) throw std::invalid_argument("TCA mask row count differs");
  const Eigen::Index keys = sla.cols() + (has_memory ? tca.cols() : 0);
  if (rows == 0 || keys == 0) return 0.0;
  const Eigen::Index active = (sla.array() || pna.array()).count() + (has_memory ? tca.count() : 0);
  return static_cast<double>(active) / (static_cast<double>(rows) * static_cast<double>(keys));
}

StaMasks build_sta_masks(const std::vector<ControlPoints>& lanes,
                         const Eigen::Ref<const Eigen::MatrixX4d>& memory_points, int m_tca) {
  const int n = static_cast<int>(lanes.size());
  const int m = n == 0 ? 0 : static_cast<int>(lanes.front().rows());
  StaMasks masks;
  masks.sla = sla_mask(n, m);
  masks.pna = pna_mask(lanes);
  masks.tca = tca_mask(stack_lanes(lanes), memory_points, m_tca);
  return masks;
}

namespace {

Eigen::MatrixXd project(const Eigen::MatrixXd& x, const Eigen::MatrixXd& w) {
  return w.size() == 0 ? x : Eigen::MatrixXd(x * w);
}

Eigen::MatrixXd attention_block(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& query_pe,
                                const Eigen::MatrixXd& keys, const Eigen::MatrixXd& key_pe,
                                const AttentionMask& mask, int heads, const AttentionWeights& w) {
  const Eigen::MatrixXd q = project(queries + query_pe, w.query);
  const Eigen::MatrixXd k = project(keys + key_pe, w.key);
  const Eigen::MatrixXd v = project(keys, w.value);
  return queries + project(masked_attention<double>(q, k, v, mask, heads), w.output);
}

}  // namespace

Eigen::MatrixXd sta_layer(const Eigen::MatrixXd& queries, const Eigen::MatrixX4d& query_points,
                          const Eigen::MatrixXd& memory_embeddings,
                          const Eigen::MatrixX4d& memory_points, const StaMasks& masks,
                          const PEConfig& pe, int heads, const StaWeights& weights) {
  if (queries.rows() != query_points.rows() || queries.cols() != pe.dim) {
    throw std::invalid_argument("sta_layer: queries must be (N*M) x C matching the PE dimension");
  }
  const Eigen::MatrixXd query_pe = positional_encodings(query_points, pe);
  Eigen::MatrixXd x = attention_block(queries, query_pe, queries, query_pe, masks.sla, heads, weights.sla);
  x = attention_block(x, query_pe, x, query_pe, masks.pna, heads, weights.pna);
  if (memory_points.rows() > 0) {
    if (memory_embeddings.rows() != memory_points.rows() || memory_embeddings.cols() != pe.dim) {
      throw std::invalid_argument("sta_layer: memory embeddings must be K x C");
    }
    const Eigen::MatrixXd memory_pe = positional_encodings(memory_points, pe);
    x = attention_block(x, query_pe, memory_embeddings, memory_pe, masks.tca, heads, weights.tca);
  }
  return x;
}

}  // namespace lanestp
