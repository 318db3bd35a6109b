#include "lanestp/spline.hpp"

#include <map>
#include <mutex>
#include <shared_mutex>
#include <tuple>

#include <Eigen/QR>

namespace lanestp {

void CurveConfig::validate() const {
  if (num_control_points < 4) throw std::invalid_argument("CurveConfig: M must be >= 4");
  if (!(y_end > y_start)) throw std::invalid_argument("CurveConfig: y_end must exceed y_start");
  if (!(x_end > x_start)) throw std::invalid_argument("CurveConfig: x_end must exceed x_start");
  if (!(z_end > z_start)) throw std::invalid_argument("CurveConfig: z_end must exceed z_start");
  if (num_samples < num_control_points) {
    throw std::invalid_argument("CurveConfig: sample count must be >= M");
  }
}

Eigen::VectorXd uniform_args(int count) {
  if (count < 2) throw std::invalid_argument("uniform_args needs at least 2 samples");
  Eigen::VectorXd args = Eigen::VectorXd::LinSpaced(count, 0.0, 1.0);
  args[count - 1] = 1.0;
  return args;
}

Eigen::VectorXd knot_args(int num_control_points) {
  Eigen::VectorXd args(num_control_points);
  for (int k = 0; k < num_control_points; ++k) {
    args[k] = static_cast<double>(k) / (num_control_points - 1);
  }
  return args;
}

double arg_for_y(double y, const CurveConfig& cfg) {
  if (!(y >= cfg.y_start && y <= cfg.y_end)) {
    throw std::domain_error("y = " + std::to_string(y) + " outside curve range [" +
                            std::to_string(cfg.y_start) + ", " + std::to_string(cfg.y_end) + "]");
  }
  return (y - cfg.y_start) / (cfg.y_end - cfg.y_start);
}

Eigen::VectorXd args_for_y(const Eigen::Ref<const Eigen::VectorXd>& y, const CurveConfig& cfg) {
  Eigen::VectorXd args(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) args[i] = arg_for_y(y[i], cfg);
  return args;
}

Eigen::VectorXd control_y(const CurveConfig& cfg) {
  Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(cfg.num_control_points, cfg.y_start, cfg.y_end);
  y[cfg.num_control_points - 1] = cfg.y_end;
  return y;
}

ControlPoints fit_control_points(const Eigen::Ref<const Eigen::MatrixX4d>& dense,
                                 const CurveConfig& cfg) {
  cfg.validate();
  const int m = cfg.num_control_points;
  if (dense.rows() < m) {
    throw std::invalid_argument("fit_control_points: need at least M dense samples");
  }
  const Eigen::VectorXd args = args_for_y(dense.col(kY), cfg);
  const BasisMatrix basis = build_basis<double>(m, args, 0);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis.weights);
  if (qr.rank() < m) {
    throw std::invalid_argument("fit_control_points: rank-deficient system (rank " +
                                std::to_string(qr.rank()) + " < M = " + std::to_string(m) + ")");
  }
  ControlPoints points(m, 4);
  points.col(kY) = control_y(cfg);
  for (int c : {int(kX), int(kZ), int(kV)}) {
    points.col(c) = qr.solve(dense.col(c));
  }
  points.col(kV) = points.col(kV).cwiseMax(0.0).cwiseMin(1.0);
  return points;
}

struct BasisCache::Impl {
  using Key = std::tuple<int, int, std::vector<double>>;
  mutable std::shared_mutex mutex;
  std::map<Key, std::shared_ptr<const BasisMatrix>> entries;
};

BasisCache::BasisCache() : impl_(std::make_unique<Impl>()) {}
BasisCache::~BasisCache() = default;

std::shared_ptr<const BasisMatrix> BasisCache::get(int num_control_points,
                                                   const Eigen::VectorXd& sample_args, int order) {
  Impl::Key key{num_control_points, order,
                std::vector<double>(sample_args.data(), sample_args.data() + sample_args.size())};
  {
    std::shared_lock lock(impl_->mutex);
    if (auto it = impl_->entries.find(key); it != impl_->entries.end()) return it->second;
  }
  auto built =
      std::make_shared<const BasisMatrix>(build_basis<double>(num_control_points, sample_args, order));
  std::unique_lock lock(impl_->mutex);
  auto [it, inserted] = impl_->entries.emplace(std::move(key), std::move(built));
  return it->second;
}

std::size_t BasisCache::size() const {
  std::shared_lock lock(impl_->mutex);
  return impl_->entries.size();
}

}  // namespace lanestp
