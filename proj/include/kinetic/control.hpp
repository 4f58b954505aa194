#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "kinetic/fitted.hpp"
#include "kinetic/flow.hpp"

namespace kinetic {

// Steer x1' = b0(r, x) + phi_r, x2' = x1 from x at time s to y at time t.
struct ControlProblem {
  FlowMap flow_map;
  double s = 0.0, t = 1.0;
  PhasePoint x, y;

  void validate() const;
  // |T_{t-s}(theta_{t,s}(x) - y)|.
  double scaled_offset() const;
};

// G(s, t) = int_s^t Phi(t, r) diag(I, 0) Phi(t, r)^T dr; linear b0 only.
Eigen::MatrixXd gramian(const FlowMap& flow_map, double s, double t);
Eigen::MatrixXd gramian(const ControlProblem& problem);

struct EnergySolution {
  double energy = 0.0;        // I = sqrt(e^T G^{-1} e)
  Eigen::VectorXd offset;     // e = y - theta_{t,s}(x)
  Eigen::VectorXd multiplier; // G^{-1} e
  Eigen::MatrixXd G;
  ControlProblem problem;

  // phi_r = B^T Phi(t, r)^T G^{-1} e.
  Eigen::VectorXd control(double r) const;
  // Optimal state at time r.
  PhasePoint state(double r) const;
  // sup_r |phi_r| sampled on `samples` + 1 points.
  double control_sup(int samples = 256) const;
};

EnergySolution energy_solution(const ControlProblem& problem);
double energy(const ControlProblem& problem);

// RK4 integration of the controlled ODE with `steps` uniform steps.
PhasePoint integrate_controlled(const FlowMap& flow_map, double s, double t, const PhasePoint& x,
                                const std::function<Eigen::VectorXd(double)>& control, int steps);

struct NumericEnergy {
  double energy = 0.0;
  std::vector<Eigen::VectorXd> control;  // piecewise constant on `steps` intervals
  double residual = 0.0;                 // terminal miss
  int iterations = 0;
  bool local = false;                    // true for nonlinear b0: the minimizer found is local
};

// Least-norm piecewise-constant control by Gauss-Newton on the RK4 shooting map.
NumericEnergy energy_numeric(const ControlProblem& problem, int steps, int substeps = 4, int max_iter = 30,
                             double tol = 1e-10);

struct ChainingPlan {
  int M = 1;
  double delta = 0.0;
  std::vector<double> times;
  std::vector<PhasePoint> nodes;     // xi_0 = x, ..., xi_M = y
  std::vector<double> step_values;   // |T_delta(theta_{t_{j+1},t_j}(xi_j) - xi_{j+1})|
  std::vector<double> slack;         // bound - step value
  double bound = 0.0;                // 2 c1 c2 + 1
  double scaled_offset = 0.0;
};

// Throws ConstructionError with the offending step if a bound is violated.
ChainingPlan build_chain(const ControlProblem& problem, double c1, double c2);

// Lebesgue measure of {z : |T_delta z| <= 1} in R^{2d}: pi^d delta^{2d} / d!.
double tube_volume(int d, double delta);

// c3 = 2 c1 c2 + 2 c0 + 2.
double chain_threshold(double c0, double c1, double c2);

// Seeded problems with s = 0, t in [t_lo, t_hi] and scaled offset in [min_offset, max_offset].
std::vector<ControlProblem> sample_problems(const FlowMap& flow_map, int count, uint64_t seed, double max_offset,
                                            double t_lo = 0.1, double t_hi = 1.0, double min_offset = 0.0);

// c1 = max over problems of max(I / (w + 1), (w - 1) / I).
FittedConstant fit_energy_c1(const std::vector<ControlProblem>& problems, Calibration calibration);
// c2 = max over problems of sup|phi| sqrt(t - s) / (w + 1).
FittedConstant fit_control_c2(const std::vector<ControlProblem>& problems, Calibration calibration);

// c1^{-1}(w - 1) <= I <= c1 (w + 1).
bool energy_sandwich_holds(const ControlProblem& problem, double c1);

}  // namespace kinetic
