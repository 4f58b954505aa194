#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <variant>
#include <vector>

#include "kinetic/fields.hpp"
#include "kinetic/grid.hpp"
#include "kinetic/phase_point.hpp"

namespace kinetic {

// ---- regular part b0 ----------------------------------------------------

struct ZeroDrift {};

// b0(t, x) = F1 x1 + F2 x2 + f0(t).
struct LinearDrift {
  Eigen::MatrixXd F1;
  Eigen::MatrixXd F2;
  Eigen::VectorXd f0;                              // constant part
  std::function<Eigen::VectorXd(double)> f0_time;  // optional time-dependent addition
};

struct CallableDrift {
  VectorFn fn;
};

using RegularPart = std::variant<ZeroDrift, LinearDrift, CallableDrift>;

// ---- singular part b1 ---------------------------------------------------

struct NoSingular {};

// b1(x) = sum_j gamma_j (x2 - c_j) / |x2 - c_j|^alpha.
struct PowerLawTerm {
  double gamma = 1.0;
  Eigen::VectorXd center;  // in the x2 block; empty means origin
};

struct PowerLawDrift {
  double alpha = 1.2;
  std::vector<PowerLawTerm> terms;
};

// Vector values sampled on a tensor grid over R^{2d} (time-independent).
struct GridSampledDrift {
  std::shared_ptr<const GridValues> values;
};

struct CallableSingular {
  VectorField field;
};

using SingularPart = std::variant<NoSingular, PowerLawDrift, GridSampledDrift, CallableSingular>;

struct DriftSpec {
  int d = 1;
  RegularPart regular = ZeroDrift{};
  SingularPart singular = NoSingular{};
  double kappa0 = 1.0;
  double kappa1 = 1.0;

  void validate() const;
  bool has_singular() const { return !std::holds_alternative<NoSingular>(singular); }
  bool regular_is_affine() const { return !std::holds_alternative<CallableDrift>(regular); }

  void regular_value(double t, std::span<const double> x, std::span<double> out) const;
  // Raw (unmollified) singular part. Power-law terms vanish at their centre.
  void singular_value(double t, std::span<const double> x, std::span<double> out) const;
  VectorField regular_field() const;
  VectorField singular_field() const;
};

DriftSpec zero_drift(int d);
DriftSpec damped_drift(int d, double damping);  // b0 = -damping * x1
DriftSpec power_law_drift(int d, double alpha, double gamma = 1.0);

// Sampled check of |b0(t,0)| <= kappa0 and Lipschitz <= kappa1.
struct DriftCheck {
  double max_origin = 0.0;
  double max_lipschitz = 0.0;
  bool ok = true;
};
DriftCheck check_regular_bounds(const DriftSpec& drift, int samples, uint64_t seed);

// ---- diffusion ----------------------------------------------------------

struct DiffusionSpec {
  enum class Kind { identity, constant, holder };
  Kind kind = Kind::identity;
  int d = 1;
  Eigen::MatrixXd matrix;  // for constant
  std::function<Eigen::MatrixXd(double, std::span<const double>)> fn;  // for holder
  double kappa0 = 1.0;
  double gamma0 = 0.5;

  Eigen::MatrixXd at(double t, std::span<const double> x) const;
  bool is_constant() const { return kind != Kind::holder; }
  Eigen::MatrixXd constant_matrix() const;
  void validate() const;
  // Sampled ellipticity check on the unit sphere.
  bool check_ellipticity(int samples, uint64_t seed) const;

  static DiffusionSpec identity(int d);
  static DiffusionSpec constant(const Eigen::MatrixXd& s, double kappa0);
};

// ---- flow ---------------------------------------------------------------

struct FlowIntegrator {
  enum class Kind { closed_form, rk4 };
  Kind kind = Kind::closed_form;
  double step = 1e-3;
};

struct FlowMap {
  DriftSpec drift;
  FlowIntegrator integrator;

  FlowMap() = default;
  explicit FlowMap(DriftSpec drift_spec, FlowIntegrator integ = {});
  int dim() const { return drift.d; }
  bool closed_form() const;
  // Block companion matrix [[F1, F2], [I, 0]]; zero drift gives [[0,0],[I,0]].
  Eigen::MatrixXd generator() const;
  // Phi(t, s) = exp(A (t - s)); requires affine b0.
  Eigen::MatrixXd transition(double s, double t) const;
};

struct FlowResult {
  PhasePoint value;
  double error_estimate = 0.0;  // Richardson estimate, 0 for closed form
};

// theta_{t,s}(x): the state at time t of the flow started at x at time s.
PhasePoint flow(const FlowMap& map, double s, double t, const PhasePoint& x);
FlowResult flow_checked(const FlowMap& map, double s, double t, const PhasePoint& x);
PhasePoint flow_rk4(const FlowMap& map, double s, double t, const PhasePoint& x, double step);
// Jacobian d theta_{t,s}(x) / dx (exact for affine b0, central differences otherwise).
Eigen::MatrixXd flow_jacobian(const FlowMap& map, double s, double t, const PhasePoint& x);

double flow_comparison_constant(const FlowMap& map, int sample_count, double horizon, uint64_t seed = 1);

}  // namespace kinetic
