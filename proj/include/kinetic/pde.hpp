#pragma once

#include <Eigen/Dense>
#include <vector>

#include "kinetic/fields.hpp"
#include "kinetic/fitted.hpp"
#include "kinetic/flow.hpp"
#include "kinetic/grid.hpp"
#include "kinetic/kato.hpp"

namespace kinetic {

// Law of X_t given X_s = x for affine b0 and constant sigma: N(Phi x + shift, C).
struct GaussianStep {
  int d = 1;
  double s = 0.0, t = 0.0;
  Eigen::MatrixXd Phi;       // state transition
  Eigen::VectorXd shift;     // mean = Phi x + shift
  Eigen::MatrixXd C;         // covariance
  Eigen::MatrixXd L;         // lower Cholesky factor of C
  Eigen::MatrixXd grad_map;  // d x 2d: x1 rows of Phi^T L^{-T}
  double log_normalizer = 0.0;

  Eigen::VectorXd mean(const Eigen::VectorXd& x) const { return Phi * x + shift; }
  double density(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
  // grad_{x1} of the density in x.
  Eigen::VectorXd density_grad_x1(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
};

class GaussianTransition {
 public:
  GaussianTransition(FlowMap flow_map, DiffusionSpec diffusion);

  int dim() const { return flow_.dim(); }
  const FlowMap& flow_map() const { return flow_; }
  const DiffusionSpec& diffusion() const { return diffusion_; }
  // Lyapunov solution C' = A C + C A^T + 2 diag(sigma sigma^T, 0), C(s) = 0, in closed form.
  Eigen::MatrixXd covariance(double s, double t) const;
  Eigen::MatrixXd transition(double s, double t) const { return flow_.transition(s, t); }
  GaussianStep step(double s, double t) const;
  double density(double s, const PhasePoint& x, double t, const PhasePoint& y) const;

 private:
  FlowMap flow_;
  DiffusionSpec diffusion_;
  Eigen::MatrixXd noise_;  // 2 diag(sigma sigma^T, 0)
};

struct SemigroupNodes {
  int space = 16;  // Gauss-Hermite per whitened axis
  int time = 16;   // Gauss-Legendre in w, r = s + w^2
};

// E f(t, X_t) given X_s = x.
double apply_semigroup(const GaussianTransition& trans, const ScalarField& f, double s, double t, const PhasePoint& x,
                       int nodes = 16);
// grad_{x1} of the above.
Eigen::VectorXd apply_semigroup_gradient(const GaussianTransition& trans, const ScalarField& f, double s, double t,
                                         const PhasePoint& x, int nodes = 16);

// int_s^T P_{r,s} f(r, .)(x) dr.
double i_operator(const GaussianTransition& trans, const ScalarField& f, double s, const PhasePoint& x, double T,
                  const SemigroupNodes& nodes = {});
Eigen::VectorXd i_operator_gradient(const GaussianTransition& trans, const ScalarField& f, double s,
                                    const PhasePoint& x, double T, const SemigroupNodes& nodes = {});

// sup_x int_0^T int (p0 + |grad_{x1} p0|) |h| over a box of starting points:
// the operator norm that the Picard contraction needs.
double picard_operator_norm(const GaussianTransition& trans, const ScalarField& h, double T,
                            const std::vector<double>& box_lo, const std::vector<double>& box_hi, int resolution = 9,
                            const SemigroupNodes& nodes = {});

// Solution values and x1-gradients on time slices x tensor space grid.
class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(std::vector<double> time_nodes, TensorGrid space, int d);

  int dim() const { return d_; }
  const std::vector<double>& time_nodes() const { return times_; }
  const TensorGrid& space() const { return space_; }
  size_t slice_size() const { return space_.size(); }

  double& value(size_t ti, size_t node) { return values_[ti * space_.size() + node]; }
  double value(size_t ti, size_t node) const { return values_[ti * space_.size() + node]; }
  double& grad(size_t ti, size_t node, int c) { return grads_[(ti * space_.size() + node) * d_ + c]; }
  double grad(size_t ti, size_t node, int c) const { return grads_[(ti * space_.size() + node) * d_ + c]; }

  // Multilinear interpolation in space, linear in time, clamped.
  double value_at(double t, std::span<const double> x) const;
  void grad_at(double t, std::span<const double> x, std::span<double> out) const;

  // Corner nodes and weights of the multilinear stencil at x; returns the count.
  int stencil(std::span<const double> x, size_t* nodes, double* weights) const;

  double sup_value() const;
  double sup_grad() const;
  // sup |u - v| + sup |grad u - grad v|.
  double distance(const GridFunction& other) const;

 private:
  void locate_time(double t, size_t& i, double& frac) const;

  std::vector<double> times_;
  TensorGrid space_;
  int d_ = 1;
  std::vector<double> values_;
  std::vector<double> grads_;
};

struct GridTemplate {
  int time_slices = 6;                // including s = 0 and s = T
  std::vector<UniformAxis> space;     // 2d axes
  // Half-widths large enough that Gaussian mass outside is < 1e-6 at horizon T.
  static GridTemplate automatic(const GaussianTransition& trans, double T, int nodes_per_axis, int time_slices,
                                double min_half_width = 1.0);
};

struct PicardOptions {
  int max_iter = 40;
  double tol = 1e-9;  // relative to the first delta
  double lambda = 0.25;
  FittedConstant C1;  // value <= 0 skips the smallness check
  double smallness_limit = 1.0;
  SemigroupNodes nodes{8, 12};
  KatoNodes kato_nodes{};
  double kato_box = 1.0;
};

struct PicardResult {
  GridFunction u;
  std::vector<double> history;
  double smallness = 0.0;     // C1 * K^(1)(|b1|; T)
  double kato_b1 = 0.0;
  double T = 0.0;
  int iterations = 0;
};

// K^(1)_lambda(|b1|; T) with a grid sup search over a box of half-width `box`.
double kato_of_drift(const VectorField& b1, double lambda, double T, double box, const KatoNodes& nodes = {});

// Largest T in (0, 1] with C1 K^(1)(|b1|; T) <= limit, by bisection.
double required_horizon(const VectorField& b1, double C1, double lambda, double limit, double box,
                        const KatoNodes& nodes = {});

// C1 = max over the family and horizons of sup(A + B) / K^(1)_lambda(|b|; T), the constant
// that turns the Kato smallness into an operator-norm bound.
FittedConstant fit_picard_constant(const GaussianTransition& trans, const std::vector<VectorField>& family,
                                   const std::vector<double>& horizons, double lambda, double box,
                                   Calibration calibration, int resolution = 9, const KatoNodes& nodes = {});

PicardResult picard_solve(const GaussianTransition& trans, const VectorField& b1, const ScalarField& f, double T,
                          const GridTemplate& grid, const PicardOptions& options);

}  // namespace kinetic
