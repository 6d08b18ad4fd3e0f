#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "opttolls/errors.hpp"

namespace opttolls {

/// E = { c + A u : |u| <= 1 }, i.e. shape matrix B = A A^T. Keeping the
/// factor A instead of B lets the ellipsoid become very thin in some
/// directions while staying long in others without losing definiteness.
class Ellipsoid {
 public:
  Ellipsoid() = default;
  Ellipsoid(Eigen::VectorXd center, Eigen::MatrixXd factor)
      : center_(std::move(center)), factor_(std::move(factor)) {
    log_det_ = std::log(std::abs(factor_.determinant()));
  }

  static Ellipsoid ball(const Eigen::VectorXd& center, double radius) {
    const auto D = center.size();
    return Ellipsoid(center, radius * Eigen::MatrixXd::Identity(D, D));
  }

  int dimension() const { return static_cast<int>(center_.size()); }
  const Eigen::VectorXd& center() const { return center_; }
  const Eigen::MatrixXd& factor() const { return factor_; }
  Eigen::MatrixXd shape() const { return factor_ * factor_.transpose(); }

  /// log(volume / unit-ball volume) = log|det A|, tracked through updates.
  double log_volume_ratio() const { return log_det_; }
  double log_volume() const {
    const double D = dimension();
    return log_det_ + 0.5 * D * std::log(std::numbers::pi) - std::lgamma(0.5 * D + 1.0);
  }

  /// (x - c)^T B^{-1} (x - c); <= 1 inside.
  double mahalanobis_sq(const Eigen::VectorXd& x) const {
    return factor_.partialPivLu().solve(x - center_).squaredNorm();
  }
  bool contains(const Eigen::VectorXd& x, double slack = 1e-9) const {
    return mahalanobis_sq(x) <= 1.0 + slack;
  }

  /// Volume ratio of one central cut in dimension D.
  static double cut_volume_ratio(int D) {
    if (D == 1) return 0.5;
    const double d = D;
    return d / (d + 1.0) * std::pow(d * d / (d * d - 1.0), 0.5 * (d - 1.0));
  }

  /// Minimum-volume ellipsoid containing this one intersected with the
  /// half-space { x : g . x >= g . center }.
  Ellipsoid cut_keep_geq(const Eigen::VectorXd& g) const {
    const int D = dimension();
    Eigen::VectorXd p = factor_.transpose() * g;
    const double norm = p.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericBreakdown("g^T B g is not positive");
    const Eigen::VectorXd u = p / norm;
    const Eigen::VectorXd Au = factor_ * u;
    Ellipsoid next;
    if (D == 1) {
      next.center_ = center_ + 0.5 * Au;
      next.factor_ = 0.5 * factor_;
    } else {
      const double d = D;
      const double alpha = d / std::sqrt(d * d - 1.0);
      const double beta = d / (d + 1.0) - alpha;
      next.center_ = center_ + Au / (d + 1.0);
      next.factor_ = alpha * factor_ + beta * Au * u.transpose();
    }
    next.log_det_ = log_det_ + std::log(cut_volume_ratio(D));
    if (!next.center_.allFinite() || !next.factor_.allFinite()) throw NumericBreakdown("non-finite update");
    return next;
  }

 private:
  Eigen::VectorXd center_;
  Eigen::MatrixXd factor_;
  double log_det_ = 0.0;
};

}  // namespace opttolls
