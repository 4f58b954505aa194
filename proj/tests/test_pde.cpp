#include <doctest.h>

#include <cmath>

#include "kinetic/errors.hpp"
#include "kinetic/kernel.hpp"
#include "kinetic/pde.hpp"

using namespace kinetic;

namespace {

GaussianTransition free_transition(int d = 1) { return {FlowMap(zero_drift(d)), DiffusionSpec::identity(d)}; }

ScalarField second_coordinate() {
  return ScalarField{[](double, std::span<const double> x) { return x[1]; }, 1, true, std::nullopt};
}

GridTemplate small_grid(double half_width = 3.0, int n = 9, int slices = 4) {
  GridTemplate g;
  g.time_slices = slices;
  g.space = {{-half_width, half_width, n}, {-half_width, half_width, n}};
  return g;
}

}  // namespace

TEST_CASE("zero drift transition is the Kolmogorov kernel") {
  const GaussianTransition tr = free_transition(2);
  const PhasePoint x(Eigen::Vector2d(0.1, 0.2), Eigen::Vector2d(-0.3, 0.0));
  const PhasePoint y(Eigen::Vector2d(0.5, -0.1), Eigen::Vector2d(0.2, 0.4));
  CHECK(tr.density(0.3, x, 1.1, y) == doctest::Approx(kolmogorov_density(2, 0.8, x, y)).epsilon(1e-12));
}

TEST_CASE("covariance solves the Lyapunov equation") {
  const GaussianTransition tr(FlowMap(damped_drift(1, 0.6)), DiffusionSpec::identity(1));
  const Eigen::MatrixXd A = tr.flow_map().generator();
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(2, 2);
  N(0, 0) = 2.0;
  const double t = 0.7, h = 1e-5;
  const Eigen::MatrixXd dC = (tr.covariance(0.0, t + h) - tr.covariance(0.0, t - h)) / (2 * h);
  const Eigen::MatrixXd C = tr.covariance(0.0, t);
  CHECK((dC - (A * C + C * A.transpose() + N)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("semigroup on constants and linear functions") {
  const GaussianTransition tr(FlowMap(damped_drift(1, 0.6)), DiffusionSpec::identity(1));
  const PhasePoint x = PhasePoint::of(0.9, -0.4);
  CHECK(apply_semigroup(tr, ScalarField::constant(1, 2.5), 0.0, 0.8, x) == doctest::Approx(2.5).epsilon(1e-13));
  // E X2 follows the drift.
  const double mean_x2 = flow(tr.flow_map(), 0.0, 0.8, x)[1];
  CHECK(apply_semigroup(tr, second_coordinate(), 0.0, 0.8, x) == doctest::Approx(mean_x2).epsilon(1e-12));
  // grad_{x1} E X2 = (1 - e^{-c t}) / c.
  const Eigen::VectorXd g = apply_semigroup_gradient(tr, second_coordinate(), 0.0, 0.8, x);
  CHECK(g[0] == doctest::Approx((1.0 - std::exp(-0.48)) / 0.6).epsilon(1e-10));
}

TEST_CASE("time integral operator") {
  const GaussianTransition tr = free_transition();
  const PhasePoint x = PhasePoint::of(0.3, 0.1);
  CHECK(i_operator(tr, ScalarField::constant(1, 1.0), 0.2, x, 0.7) == doctest::Approx(0.5).epsilon(1e-13));
  // int_s^T (x2 + (r - s) x1) dr
  const double expect = 0.5 * 0.1 + 0.5 * 0.5 * 0.5 * 0.3;
  CHECK(i_operator(tr, second_coordinate(), 0.2, x, 0.7) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(i_operator_gradient(tr, second_coordinate(), 0.2, x, 0.7)[0] == doctest::Approx(0.125).epsilon(1e-12));
  CHECK_THROWS_AS(i_operator(tr, second_coordinate(), 0.7, x, 0.7), DomainError);
}

TEST_CASE("grid function interpolates linear data exactly") {
  GridFunction u({0.0, 0.5, 1.0}, TensorGrid({{-1.0, 1.0, 5}, {-2.0, 2.0, 5}}), 1);
  for (size_t ti = 0; ti < 3; ++ti)
    for (size_t n = 0; n < u.slice_size(); ++n) {
      const auto x = u.space().node(n);
      const double t = u.time_nodes()[ti];
      u.value(ti, n) = 1.0 + 2.0 * x[0] - x[1] + 3.0 * t;
      u.grad(ti, n, 0) = 2.0;
    }
  const double x[2] = {0.31, -0.77};
  CHECK(u.value_at(0.8, x) == doctest::Approx(1.0 + 0.62 + 0.77 + 2.4));
  double g[1];
  u.grad_at(0.8, x, g);
  CHECK(g[0] == doctest::Approx(2.0));
  CHECK(u.sup_grad() == doctest::Approx(2.0));
  CHECK(u.distance(u) == 0.0);
  CHECK_THROWS_AS(GridFunction({0.0}, TensorGrid({{0, 1, 2}, {0, 1, 2}}), 1), ArgumentError);
}

TEST_CASE("Picard with zero perturbation stops after one step") {
  const GaussianTransition tr = free_transition();
  const ScalarField f = ScalarField::gaussian(PhasePoint(1), Eigen::Vector2d(0.5, 0.5));
  PicardOptions opt;
  opt.C1.value = 0.0;
  const PicardResult r = picard_solve(tr, VectorField::zero(1), f, 0.2, small_grid(), opt);
  REQUIRE(r.history.size() == 2);
  CHECK(r.history[1] == 0.0);
  const double x[2] = {0.0, 0.0};
  const double direct = i_operator(tr, f, 0.0, PhasePoint(1), 0.2, opt.nodes);
  CHECK(r.u.value_at(0.0, x) == doctest::Approx(direct).epsilon(1e-10));
}

TEST_CASE("Picard iteration contracts for a small constant drift") {
  const GaussianTransition tr = free_transition();
  const ScalarField f = ScalarField::gaussian(PhasePoint(1), Eigen::Vector2d(0.5, 0.5));
  PicardOptions opt;
  opt.tol = 1e-8;
  const PicardResult r = picard_solve(tr, VectorField::constant(Eigen::VectorXd::Constant(1, 0.5)), f, 0.2,
                                      small_grid(), opt);
  REQUIRE(r.history.size() >= 3);
  for (size_t k = 2; k < r.history.size(); ++k) CHECK(r.history[k] < 0.5 * r.history[k - 1]);
}

TEST_CASE("smallness failure reports the admissible horizon") {
  const GaussianTransition tr = free_transition();
  const VectorField b = VectorField::constant(Eigen::VectorXd::Constant(1, 1.0));
  PicardOptions opt;
  opt.C1.value = 1.0;
  opt.smallness_limit = 0.5;
  opt.kato_nodes = {12, 12};
  try {
    picard_solve(tr, b, ScalarField::constant(1, 1.0), 1.0, small_grid(), opt);
    FAIL("expected a smallness failure");
  } catch (const SmallnessError& e) {
    const double need = e.required_horizon();
    CHECK(need > 0.0);
    CHECK(need < 1.0);
    CHECK(kato_of_drift(b, opt.lambda, need, 1.0, opt.kato_nodes) <= 0.5 * (1 + 1e-6));
  }
}
