#pragma once

#include <functional>
#include <limits>
#include <variant>
#include <vector>

#include "kinetic/fields.hpp"
#include "kinetic/flow.hpp"
#include "kinetic/phase_point.hpp"

namespace kinetic {

struct FixedPoint {
  double t = 0.0;
  PhasePoint x;
};

// Coarse grid over a box, then local refinement around the incumbent.
struct GridSearch {
  double t_lo = 0.0, t_hi = 0.0;  // time window (ignored for time-independent f)
  std::vector<double> lo, hi;     // 2d box
  int resolution = 5;             // nodes per searched axis
  int refine_steps = 3;

  static GridSearch box(int d, double half_width, int resolution = 5);
};

using SupSearch = std::variant<FixedPoint, GridSearch>;

struct KatoNodes {
  int space = 32;  // Gauss-Hermite nodes per active space axis
  int time = 24;   // Gauss-Jacobi nodes in r
};

struct KatoQuery {
  ScalarField f;
  double lambda = 1.0;
  double beta = 1.0;
  double delta = 0.25;
  SupSearch search;
  KatoNodes nodes;
};

struct KatoEstimate {
  double value = 0.0;
  double quad_error = 0.0;  // |doubled-node value - value| at the argsup
  double argsup_t = 0.0;
  PhasePoint argsup_x;
  long nodes_used = 0;
  bool search_converged = true;
  bool time_window_restricted = false;  // time-dependent f searched only on the declared window
};

// Inner integral at one (t, x): int_0^delta int eta(r,y) sum_{+-,+-} |f(t+-r, x+-y)| dy dr.
double kato_integral_at(const ScalarField& f, double lambda, double beta, double delta, double t,
                        const PhasePoint& x, const KatoNodes& nodes, long* evals = nullptr);

KatoEstimate kato_functional(const KatoQuery& query);

// 4 (pi/lambda)^d delta^{1-beta/2} / (1 - beta/2).
double kato_constant_closed_form(double c, double lambda, double beta, double delta, int d);

// Displayed power-law bound for |x2|^{1-alpha} (beta = 1):
// 2 delta^{2-3a/2}/(4-3a) * (int_{|y|<=1} |y|^{1-a} dy + int e^{-lambda |y|^2} dy), y in R^d.
double kato_power_law_closed_form(double alpha, double lambda, double delta, int d);
// The same estimate carried through the x1 Gaussian factor and the four sign terms,
// which makes it an upper bound for the functional itself.
double kato_power_law_bound(double alpha, double lambda, double delta, int d);
// Exact value of the functional for |x2|^{1-alpha} (attained at x2 = 0), any beta < 2.
double kato_power_law_exact(double alpha, double lambda, double beta, double delta, int d);

struct MixedNormSpec {
  double q = std::numeric_limits<double>::infinity();
  std::vector<double> p;  // 2d exponents, x1 block first
  double kappa() const;
};

double mixed_norm_kato_bound(const MixedNormSpec& spec, double f_norm, double beta, double T, double lambda);

// K(|f|; r) <= K(|f|^gamma; r)^{1/gamma} (4 (pi/lambda)^d (2/(2-beta)) r^{(2-beta)/2})^{(gamma-1)/gamma}.
double holder_improvement_bound(double gamma, double K_gamma, double beta, double lambda, double r, int d);

// C e^{10 lambda} delta^{beta/2+2d} K with C = d^{2d} / (1 - 2^{-beta/2}).
double local_l1_from_kato(const KatoEstimate& estimate, double delta, double lambda, double beta, int d);
// Direct tube integral int_0^delta int_{|y1|<=sqrt(delta), |y2|<=delta^{3/2}} sum |f(t+-r, x+-y)| (d = 1).
double local_tube_integral(const ScalarField& f, double t, const PhasePoint& x, double delta, int nodes = 32);

struct ConvolutionCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double kappa_used = 0.0;
  double kato_value = 0.0;
  double g_value = 0.0;
};

// lhs = int_s^t int g^(alpha)(s,x;r,z) f(r,z) g^(beta)(r,z;t,y) dz dr by split quadrature.
double convolution_lhs(const FlowMap& flow_map, double lambda, double alpha, double beta, const ScalarField& f,
                       double s, const PhasePoint& x, double t, const PhasePoint& y, int space_nodes = 24,
                       int time_nodes = 24);

// kato(delta, lambda') must return K^(beta)_{lambda'}(f; delta).
using KatoProvider = std::function<double(double delta, double lambda)>;

ConvolutionCheck convolution_inequality_check(const FlowMap& flow_map, double lambda, double alpha, double beta,
                                              const ScalarField& f, double s, const PhasePoint& x, double t,
                                              const PhasePoint& y, double c0, double C1, const KatoProvider& kato);

// kappa = 1/(16 c0^4).
double convolution_kappa(double c0);

}  // namespace kinetic
