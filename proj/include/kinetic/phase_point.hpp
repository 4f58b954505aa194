#pragma once

#include <Eigen/Dense>
#include <span>

namespace kinetic {

// Point (x1, x2) of R^{2d}; x1 is velocity, x2 is position.
// Stored stacked as [x1; x2].
class PhasePoint {
 public:
  PhasePoint() = default;
  explicit PhasePoint(int d);
  PhasePoint(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2);

  static PhasePoint stacked(const Eigen::VectorXd& z);
  static PhasePoint from_span(std::span<const double> z);
  // d = 1 shorthand.
  static PhasePoint of(double x1, double x2);

  int dim() const { return static_cast<int>(z_.size() / 2); }
  auto x1() const { return z_.head(dim()); }
  auto x2() const { return z_.tail(dim()); }
  auto x1() { return z_.head(dim()); }
  auto x2() { return z_.tail(dim()); }

  const Eigen::VectorXd& vec() const { return z_; }
  Eigen::VectorXd& vec() { return z_; }
  std::span<const double> span() const { return {z_.data(), static_cast<size_t>(z_.size())}; }
  double operator[](int i) const { return z_[i]; }
  double& operator[](int i) { return z_[i]; }

  bool finite() const { return z_.allFinite(); }

  PhasePoint operator-(const PhasePoint& o) const { return stacked(z_ - o.z_); }
  PhasePoint operator+(const PhasePoint& o) const { return stacked(z_ + o.z_); }
  bool operator==(const PhasePoint& o) const { return z_ == o.z_; }

 private:
  Eigen::VectorXd z_;
};

// Blockwise scaling x -> (x1 t^{-1/2}, x2 t^{-3/2}).
class ScaleMatrix {
 public:
  explicit ScaleMatrix(double t);
  double t() const { return t_; }
  PhasePoint apply(const PhasePoint& x) const;
  PhasePoint apply_inverse(const PhasePoint& x) const;
  // |T_t x|^2 without building the point.
  double norm_sq(const PhasePoint& x) const;
  double norm_sq(std::span<const double> z) const;

 private:
  double t_;
};

// max(|x1|, |x2|^{1/3}) with Euclidean block norms.
double aniso_distance(const PhasePoint& x);

}  // namespace kinetic
