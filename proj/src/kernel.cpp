#include "kinetic/kernel.hpp"

#include <cmath>

#include "kinetic/errors.hpp"

namespace kinetic {

void KernelParams::validate() const {
  if (!(lambda > 0.0)) throw DomainError("KernelParams: lambda must be positive");
  if (!(beta >= 0.0)) throw DomainError("KernelParams: beta must be nonnegative");
  if (d < 1) throw ArgumentError("KernelParams: d must be >= 1");
}

double eta_from_scaled(const KernelParams& p, double t, double scaled_norm_sq) {
  if (!(t > 0.0)) throw DomainError("eta: t must be positive");
  return std::pow(t, -0.5 * p.beta - 2.0 * p.d) * std::exp(-p.lambda * scaled_norm_sq);
}

double eta(const KernelParams& p, double t, const PhasePoint& x) {
  if (!(t > 0.0)) throw DomainError("eta: t must be positive");
  return eta_from_scaled(p, t, ScaleMatrix(t).norm_sq(x));
}

KolmogorovKernel::KolmogorovKernel(int d, double t) : d_(d), t_(t) {
  if (d < 1) throw ArgumentError("KolmogorovKernel: d must be >= 1");
  if (!(t > 0.0)) throw DomainError("KolmogorovKernel: t must be positive");
}

Eigen::MatrixXd KolmogorovKernel::covariance() const {
  const double t = t_;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(2 * d_, 2 * d_);
  for (int i = 0; i < d_; ++i) {
    K(i, i) = 2 * t;
    K(i, d_ + i) = K(d_ + i, i) = t * t;
    K(d_ + i, d_ + i) = 2 * t * t * t / 3;
  }
  return K;
}

Eigen::MatrixXd KolmogorovKernel::inverse_covariance() const {
  const double t = t_;
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(2 * d_, 2 * d_);
  for (int i = 0; i < d_; ++i) {
    K(i, i) = 2 / t;
    K(i, d_ + i) = K(d_ + i, i) = -3 / (t * t);
    K(d_ + i, d_ + i) = 6 / (t * t * t);
  }
  return K;
}

double KolmogorovKernel::determinant() const { return std::pow(t_ * t_ * t_ * t_ / 3.0, d_); }

double KolmogorovKernel::normalizer() const { return std::pow(std::sqrt(3.0) / (2.0 * M_PI * t_ * t_), d_); }

PhasePoint KolmogorovKernel::mean(const PhasePoint& x) const {
  PhasePoint m = x;
  m.x2() += t_ * x.x1();
  return m;
}

double KolmogorovKernel::quadratic_form(const PhasePoint& z) const {
  const double t = t_;
  double q = 0.0;
  for (int i = 0; i < d_; ++i) {
    const double a = z[i], b = z[d_ + i];
    q += 2 * a * a / t - 6 * a * b / (t * t) + 6 * b * b / (t * t * t);
  }
  return q;
}

double KolmogorovKernel::density(const PhasePoint& x, const PhasePoint& y) const {
  if (x.dim() != d_ || y.dim() != d_) throw ArgumentError("KolmogorovKernel: dimension mismatch");
  return normalizer() * std::exp(-0.5 * quadratic_form(y - mean(x)));
}

double kolmogorov_density(int d, double t, const PhasePoint& x, const PhasePoint& y) {
  return KolmogorovKernel(d, t).density(x, y);
}

DensityBounds kolmogorov_bounds(int d, double t, const PhasePoint& x, const PhasePoint& y) {
  const KolmogorovKernel k(d, t);
  const double w = ScaleMatrix(t).norm_sq(y - k.mean(x));
  const double c = k.normalizer();
  return {c * std::exp(-2.0 * kFormRateHigh * w), c * std::exp(-2.0 * kFormRateLow * w)};
}

double g_kernel(const KernelParams& p, const FlowMap& flow_map, double s, const PhasePoint& x, double t,
                const PhasePoint& y) {
  if (!(s < t)) throw DomainError("g_kernel: requires s < t");
  const PhasePoint offset = flow(flow_map, s, t, x) - y;
  return eta(p, t - s, offset);
}

}  // namespace kinetic
