#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kinetic/fields.hpp"
#include "kinetic/fitted.hpp"
#include "kinetic/flow.hpp"
#include "kinetic/kato.hpp"
#include "kinetic/phase_point.hpp"

namespace kinetic {

struct SingularMode {
  enum class Kind { mollified, tamed, exact };
  Kind kind = Kind::mollified;
  int n = 8;

  static SingularMode mollified(int n) { return {Kind::mollified, n}; }
  static SingularMode tamed(int n) { return {Kind::tamed, n}; }
  static SingularMode exact() { return {Kind::exact, 0}; }
};

// The singular part as the simulation sees it (mollified, tamed or raw).
VectorField effective_singular(const DriftSpec& drift, const SingularMode& mode);

struct SimulationPlan {
  DriftSpec drift;
  DiffusionSpec diffusion;
  PhasePoint x0;
  double s0 = 0.0;
  double horizon = 1.0;
  double dt = 1e-3;
  long paths = 1000;
  uint64_t seed = 1;
  SingularMode singular_mode;
  std::vector<double> record_times;  // absolute times on the step grid; empty = final time only
  int record_every = 0;              // > 0: record every k steps (overrides record_times)

  long steps() const;
  void validate() const;
};

// Piecewise-constant control on knots t_0 < ... < t_K.
struct ControlPath {
  std::vector<double> knots;
  std::vector<Eigen::VectorXd> h_dot;  // value on [t_k, t_{k+1})
  double budget = -1.0;                // negative = unchecked

  double energy() const;
  Eigen::VectorXd at(double t) const;
  void validate(int d) const;
  static ControlPath constant(double s, double t, const Eigen::VectorXd& value);
};

class PathEnsemble {
 public:
  PathEnsemble() = default;
  PathEnsemble(int d, std::vector<double> times, long paths, uint64_t seed);

  int dim() const { return d_; }
  long paths() const { return paths_; }
  uint64_t seed() const { return seed_; }
  const std::vector<double>& times() const { return times_; }
  long flagged() const { return flagged_; }

  std::span<const double> state(long path, size_t ti) const {
    return {states_.data() + (static_cast<size_t>(path) * times_.size() + ti) * 2 * d_, static_cast<size_t>(2 * d_)};
  }
  std::span<double> state(long path, size_t ti) {
    return {states_.data() + (static_cast<size_t>(path) * times_.size() + ti) * 2 * d_, static_cast<size_t>(2 * d_)};
  }
  double drift_integral(long path) const { return drift_integral_[path]; }
  double& drift_integral(long path) { return drift_integral_[path]; }

  // Index of the recorded time closest to t; throws if none within 1e-9.
  size_t time_index(double t) const;
  // Drops the flagged paths and stores their count.
  void compact(const std::vector<char>& flags);

  std::vector<double>& raw_states() { return states_; }
  const std::vector<double>& raw_states() const { return states_; }
  std::vector<double>& raw_drift_integral() { return drift_integral_; }
  const std::vector<double>& raw_drift_integral() const { return drift_integral_; }

 private:
  int d_ = 1;
  std::vector<double> times_;
  long paths_ = 0;
  uint64_t seed_ = 0;
  long flagged_ = 0;
  std::vector<double> states_;
  std::vector<double> drift_integral_;
};

PathEnsemble simulate(const SimulationPlan& plan);
PathEnsemble simulate_controlled(const SimulationPlan& plan, const ControlPath& control);

// Sample mean and covariance of the recorded states at time index ti.
struct Moments2 {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd cov_std_error;  // entrywise standard errors
};
Moments2 sample_moments(const PathEnsemble& ens, size_t ti);

struct KrylovResult {
  double mc_value = 0.0;
  double mc_std_error = 0.0;
  double kato_value = 0.0;
  double ratio = 0.0;
};

// Kato side uses query.f = f and query.delta = t (query.beta is forced to 1).
KrylovResult krylov_estimate(const PathEnsemble& ens, const ScalarField& f, double t, KatoQuery query);

}  // namespace kinetic
