#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "kinetic/flow.hpp"
#include "kinetic/phase_point.hpp"

namespace kinetic {

struct KernelParams {
  double lambda = 1.0;
  double beta = 0.0;
  int d = 1;
  void validate() const;
};

// eta(t, x) = t^{-beta/2 - 2d} exp(-lambda |T_t x|^2).
double eta(const KernelParams& p, double t, const PhasePoint& x);
// Same with |T_t x|^2 supplied directly.
double eta_from_scaled(const KernelParams& p, double t, double scaled_norm_sq);

// Transition law of the free kinetic chain dX1 = sqrt(2) dW, dX2 = X1 dt.
class KolmogorovKernel {
 public:
  KolmogorovKernel(int d, double t);

  int dim() const { return d_; }
  double t() const { return t_; }
  Eigen::MatrixXd covariance() const;
  Eigen::MatrixXd inverse_covariance() const;
  double determinant() const;
  double normalizer() const;  // (sqrt(3)/(2 pi t^2))^d
  PhasePoint mean(const PhasePoint& x) const;
  // z^T K_t^{-1} z in closed form.
  double quadratic_form(const PhasePoint& z) const;
  double density(const PhasePoint& x, const PhasePoint& y) const;

 private:
  int d_;
  double t_;
};

// Normalized Gaussian density of X_t given X_0 = x:
// (sqrt(3)/(2 pi t^2))^d exp(-Q/2), Q = (y - theta_t x)^T K_t^{-1} (y - theta_t x).
double kolmogorov_density(int d, double t, const PhasePoint& x, const PhasePoint& y);

// Rates c- = (4 - sqrt 13)/4 and c+ = (4 + sqrt 13)/4 satisfy
// c- |T_t z|^2 <= Q/4 <= c+ |T_t z|^2 for every z.
inline const double kFormRateLow = (4.0 - std::sqrt(13.0)) / 4.0;
inline const double kFormRateHigh = (4.0 + std::sqrt(13.0)) / 4.0;

struct DensityBounds {
  double lower = 0.0;
  double upper = 0.0;
};

// Sharp sandwich of kolmogorov_density: normalizer * exp(-2 c+- |T_t z|^2).
DensityBounds kolmogorov_bounds(int d, double t, const PhasePoint& x, const PhasePoint& y);

// g(s, x; t, y) = eta(t - s, theta_{t,s}(x) - y).
double g_kernel(const KernelParams& p, const FlowMap& flow_map, double s, const PhasePoint& x, double t,
                const PhasePoint& y);

}  // namespace kinetic
