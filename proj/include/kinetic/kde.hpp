#pragma once

#include <Eigen/Dense>
#include <vector>

#include "kinetic/fitted.hpp"
#include "kinetic/flow.hpp"
#include "kinetic/montecarlo.hpp"

namespace kinetic {

struct KdeValue {
  double estimate = 0.0;
  double std_error = 0.0;
};

// Gaussian-product KDE in coordinates whitened by the sample covariance,
// bandwidth c M^{-1/(2d+4)} on every whitened axis.
class KdeEstimator {
 public:
  // max_samples > 0 keeps only the first paths (for cheap grid checks).
  KdeEstimator(const PathEnsemble& ens, size_t ti, double c = 1.06, long max_samples = -1);

  double bandwidth() const { return h_; }
  long samples() const { return m_; }
  KdeValue operator()(const PhasePoint& y) const;
  KdeValue operator()(std::span<const double> y) const;
  // Grid quadrature of the estimate over mean +- half_width sample standard deviations.
  double mass(double half_width, int points_per_axis) const;

 private:
  int d_;
  long m_;
  double h_;
  double log_scale_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd whiten_;    // L^{-1}
  std::vector<double> white_; // whitened samples, 2d per sample
};

KdeValue kde_density(const PathEnsemble& ens, double t, const PhasePoint& y, double c = 1.06);

struct SandwichPoint {
  PhasePoint y;
  double scaled_sq = 0.0;  // |T_{t-s}(theta - y)|^2
  double estimate = 0.0;
  double std_error = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool ok = true;
};

struct TwoSidedOptions {
  std::vector<double> calibration_radii{0.4, 0.6, 0.8};
  std::vector<double> test_radii{0.5, 0.7};
  int angles = 24;
  double sigmas = 3.0;
  double bandwidth_c = 1.06;
  uint64_t calibration_seed = 0;  // recorded in the fitted constants
};

struct TwoSidedReport {
  FittedConstant C0, lambda0, C1, lambda1;  // lower: C0, lambda0; upper: C1, lambda1
  std::vector<SandwichPoint> calibration;
  std::vector<SandwichPoint> test;
  bool all_ok = true;
  double r_squared = 0.0;  // quadratic fit of log-density in the scaled offset
  double kde_mass = 0.0;   // absolute-continuity surrogate (d = 1 only, else negative)
};

// Sandwich C0 t^{-2d} e^{-lambda0 w} <= p <= C1 t^{-2d} e^{-lambda1 w}, w = |T(theta - y)|^2,
// fitted on a polar calibration grid and checked on a disjoint one.
TwoSidedReport verify_two_sided(const PathEnsemble& ens, double t, const FlowMap& flow_map, double s,
                                const PhasePoint& x, const TwoSidedOptions& options = {});

}  // namespace kinetic
