#include "kinetic/phase_point.hpp"

#include <cmath>

#include "kinetic/errors.hpp"

namespace kinetic {

PhasePoint::PhasePoint(int d) {
  if (d < 1) throw ArgumentError("PhasePoint: d must be >= 1");
  z_ = Eigen::VectorXd::Zero(2 * d);
}

PhasePoint::PhasePoint(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2) {
  if (x1.size() != x2.size() || x1.size() < 1)
    throw ArgumentError("PhasePoint: blocks must share a length d >= 1");
  z_.resize(2 * x1.size());
  z_ << x1, x2;
  if (!z_.allFinite()) throw DomainError("PhasePoint: non-finite entry");
}

PhasePoint PhasePoint::stacked(const Eigen::VectorXd& z) {
  if (z.size() < 2 || z.size() % 2 != 0)
    throw ArgumentError("PhasePoint: stacked vector must have even length >= 2");
  PhasePoint p;
  p.z_ = z;
  return p;
}

PhasePoint PhasePoint::from_span(std::span<const double> z) {
  return stacked(Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size())));
}

PhasePoint PhasePoint::of(double x1, double x2) {
  PhasePoint p(1);
  p.z_ << x1, x2;
  return p;
}

ScaleMatrix::ScaleMatrix(double t) : t_(t) {
  if (!(t > 0.0)) throw DomainError("ScaleMatrix: t must be positive");
}

PhasePoint ScaleMatrix::apply(const PhasePoint& x) const {
  PhasePoint out = x;
  out.x1() /= std::sqrt(t_);
  out.x2() /= t_ * std::sqrt(t_);
  return out;
}

PhasePoint ScaleMatrix::apply_inverse(const PhasePoint& x) const {
  PhasePoint out = x;
  out.x1() *= std::sqrt(t_);
  out.x2() *= t_ * std::sqrt(t_);
  return out;
}

double ScaleMatrix::norm_sq(std::span<const double> z) const {
  const size_t d = z.size() / 2;
  double a = 0.0, b = 0.0;
  for (size_t i = 0; i < d; ++i) {
    a += z[i] * z[i];
    b += z[d + i] * z[d + i];
  }
  return a / t_ + b / (t_ * t_ * t_);
}

double ScaleMatrix::norm_sq(const PhasePoint& x) const { return norm_sq(x.span()); }

double aniso_distance(const PhasePoint& x) {
  return std::max(x.x1().norm(), std::cbrt(x.x2().norm()));
}

}  // namespace kinetic
