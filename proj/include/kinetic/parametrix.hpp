#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "kinetic/fields.hpp"
#include "kinetic/pde.hpp"

namespace kinetic {

struct QuadratureMode {
  int time_nodes = 16;   // Gauss-Legendre in w, r = t - w^2
  int space_nodes = 12;  // Gauss-Hermite per bridge axis
};

struct ImportanceMode {
  long samples = 100000;
  uint64_t seed = 1;
};

using ParametrixIntegrator = std::variant<QuadratureMode, ImportanceMode>;

struct ParametrixConfig {
  GaussianTransition base;
  VectorField b1;
  int order = 3;
  ParametrixIntegrator integrator = QuadratureMode{};
  // Optional Kato-based reporting: lambda for Lambda = K^(1)_lambda(|b1|; t - s).
  std::optional<double> kato_lambda;
  double kappa = 1.0;  // lambda ladder lambda_j = kappa^{j-1} lambda

  void validate() const;
};

struct KernelEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::vector<double> terms;       // terms[0] = p0, terms[j] = p0 (x) H^{(x) j}
  std::vector<double> term_errors;
  bool divergence = false;
  double lambda_estimate = -1.0;   // Lambda, negative when not computed
  std::vector<double> lambda_ladder;
};

// H(r, z; t, y) = b1(r, z) . grad_{z1} p0(r, z; t, y).
double h_kernel(const ParametrixConfig& cfg, double r, const PhasePoint& z, double t, const PhasePoint& y);

// Gaussian law of X_r given X_s = x and X_t = y under the base transition.
struct Bridge {
  Eigen::VectorXd mean;
  Eigen::MatrixXd chol;  // lower factor of the covariance
};
Bridge gaussian_bridge(const GaussianTransition& base, double s, const PhasePoint& x, double r, double t,
                       const PhasePoint& y);

// Kernel k(s, x; r, z) entering lhs (x) H.
using KernelFn = std::function<double(double s, const PhasePoint& x, double r, const PhasePoint& z)>;

// int_s^t int lhs(s,x;r,z) H(r,z;t,y) dz dr.
KernelEstimate convolve_once(const ParametrixConfig& cfg, const KernelFn& lhs, double s, const PhasePoint& x,
                             double t, const PhasePoint& y);

// p0 + sum_{j=1..N} p0 (x) H^{(x) j}.
KernelEstimate parametrix_series(const ParametrixConfig& cfg, double s, const PhasePoint& x, double t,
                                 const PhasePoint& y);

}  // namespace kinetic
