#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

#include "maxfusion/tensor.hpp"

namespace maxfusion {

struct StatsConfig {
  /// Channel-vector norms and spatial sigma sums below this count as zero.
  double epsilon_norm = 1e-12;
  /// Correlations within this distance of +-1 are reported as exactly +-1, so
  /// parallel vectors pass a delta = 1 gate despite rounding.
  double rho_snap = 1e-12;

  void validate() const {
    if (!(epsilon_norm > 0.0) || !std::isfinite(epsilon_norm)) {
      throw InputError("epsilon_norm must be a positive finite value");
    }
    if (!(rho_snap >= 0.0 && rho_snap < 1.0)) throw InputError("rho_snap must lie in [0, 1)");
  }
};

namespace detail {

inline SpatialMap row_to_map(const Eigen::RowVectorXd& row, Index height, Index width) {
  return SpatialMap(Field(row.reshaped<Eigen::RowMajor>(height, width)));
}

}  // namespace detail

/// Population standard deviation (divide by C) of each location's channel
/// vector, accumulated in double. Constant vectors give exactly zero.
template <typename Scalar>
SpatialMap channel_std_map(const FeatureMap<Scalar>& f) {
  const Eigen::MatrixXd m = f.matrix().template cast<double>();
  const Eigen::RowVectorXd mean = m.colwise().mean();
  Eigen::RowVectorXd var = (m.rowwise() - mean).colwise().squaredNorm() / static_cast<double>(f.channels());
  const auto flat = (m.colwise().maxCoeff().array() == m.colwise().minCoeff().array()).eval();
  var = flat.select(0.0, var.array()).matrix();
  return detail::row_to_map(var.cwiseSqrt(), f.height(), f.width());
}

/// Divides a sigma map by its spatial sum. The sum is taken sequentially in
/// row-major order. A sum below epsilon yields the uniform map 1/(H*W).
inline SpatialMap normalize_spatial(const SpatialMap& sigma, const StatsConfig& cfg = {}) {
  cfg.validate();
  const Field& s = sigma.array();
  double total = 0.0;
  for (Index i = 0; i < s.size(); ++i) total += s.data()[i];
  if (total < cfg.epsilon_norm) {
    return SpatialMap(Field::Constant(s.rows(), s.cols(), 1.0 / static_cast<double>(s.size())));
  }
  return SpatialMap(Field(s / total));
}

template <typename Scalar>
SpatialMap normalized_std_map(const FeatureMap<Scalar>& f, const StatsConfig& cfg = {}) {
  return normalize_spatial(channel_std_map(f), cfg);
}

/// Cosine similarity of the two channel vectors at each location, clamped to
/// [-1, 1] and snapped to +-1 within rho_snap. Zero when either vector's norm
/// is below epsilon.
template <typename Scalar>
SpatialMap correlation_map(const FeatureMap<Scalar>& f1, const FeatureMap<Scalar>& f2,
                           const StatsConfig& cfg = {}) {
  cfg.validate();
  if (!f1.same_shape(f2)) {
    throw InputError("correlation_map shape mismatch: " + f1.shape() + " vs " + f2.shape());
  }
  const Eigen::MatrixXd a = f1.matrix().template cast<double>();
  const Eigen::MatrixXd b = f2.matrix().template cast<double>();
  const Eigen::RowVectorXd dot = a.cwiseProduct(b).colwise().sum();
  // Same reduction as dot, so a == b gives dot == na bit for bit.
  const Eigen::RowVectorXd na = a.cwiseProduct(a).colwise().sum();
  const Eigen::RowVectorXd nb = b.cwiseProduct(b).colwise().sum();

  Eigen::RowVectorXd rho(f1.locations());
  for (Index p = 0; p < rho.size(); ++p) {
    if (std::sqrt(na[p]) < cfg.epsilon_norm || std::sqrt(nb[p]) < cfg.epsilon_norm) {
      rho[p] = 0.0;
    } else {
      const double r = dot[p] / std::sqrt(na[p] * nb[p]);
      rho[p] = std::abs(r) >= 1.0 - cfg.rho_snap ? std::copysign(1.0, r) : r;
    }
  }
  return detail::row_to_map(rho, f1.height(), f1.width());
}

}  // namespace maxfusion
