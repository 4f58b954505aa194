#include <doctest.h>

#include <cmath>

#include "kinetic/control.hpp"
#include "kinetic/errors.hpp"

using namespace kinetic;

namespace {

ControlProblem free_problem(double t, const PhasePoint& y) { return {FlowMap(zero_drift(1)), 0.0, t, PhasePoint(1), y}; }

}  // namespace

TEST_CASE("free Gramian in closed form") {
  for (double t : {0.3, 1.0, 2.5}) {
    const Eigen::MatrixXd G = gramian(FlowMap(zero_drift(1)), 0.0, t);
    CHECK(G(0, 0) == doctest::Approx(t));
    CHECK(G(0, 1) == doctest::Approx(t * t / 2));
    CHECK(G(1, 0) == doctest::Approx(t * t / 2));
    CHECK(G(1, 1) == doctest::Approx(t * t * t / 3));
  }
}

TEST_CASE("minimal energy for unit offsets") {
  CHECK(energy(free_problem(1.0, PhasePoint::of(0, 1))) == doctest::Approx(std::sqrt(12.0)));
  CHECK(energy(free_problem(1.0, PhasePoint::of(1, 0))) == doctest::Approx(2.0));
  // Scaling: I(t) for the offset T_t^{-1} e is independent of t.
  const double a = energy(free_problem(0.25, PhasePoint::of(0.5, 0.125)));
  CHECK(a == doctest::Approx(energy(free_problem(1.0, PhasePoint::of(1, 1)))).epsilon(1e-10));
}

TEST_CASE("optimal control reaches the target") {
  const FlowMap damped(damped_drift(1, 0.4));
  const ControlProblem p{damped, 0.0, 0.8, PhasePoint::of(0.3, -0.2), PhasePoint::of(-0.5, 0.6)};
  const EnergySolution sol = energy_solution(p);
  const PhasePoint end = integrate_controlled(damped, 0.0, 0.8, p.x, [&](double r) { return sol.control(r); }, 400);
  CHECK((end.vec() - p.y.vec()).norm() < 1e-9);
  CHECK((sol.state(0.8).vec() - p.y.vec()).norm() < 1e-9);
  CHECK((sol.state(0.0).vec() - p.x.vec()).norm() < 1e-12);
}

TEST_CASE("numeric energy agrees with the Gramian for linear drift") {
  const ControlProblem p = free_problem(1.0, PhasePoint::of(0.7, -0.4));
  const NumericEnergy n = energy_numeric(p, 64);
  CHECK(n.residual < 1e-8);
  CHECK_FALSE(n.local);
  CHECK(n.energy == doctest::Approx(energy(p)).epsilon(1e-3));
}

TEST_CASE("chain over a far offset") {
  const ControlProblem p = free_problem(1.0, PhasePoint::of(std::sqrt(9.5), 0.0));
  CHECK(p.scaled_offset() * p.scaled_offset() == doctest::Approx(9.5));
  const ChainingPlan plan = build_chain(p, 4.0, 4.0);
  CHECK(plan.M == 10);
  CHECK(plan.delta == doctest::Approx(0.1));
  REQUIRE(plan.nodes.size() == 11);
  CHECK((plan.nodes.front().vec() - p.x.vec()).norm() == 0.0);
  CHECK((plan.nodes.back().vec() - p.y.vec()).norm() < 1e-12);
  for (double v : plan.step_values) CHECK(v <= plan.bound);
  CHECK(build_chain(free_problem(1.0, PhasePoint::of(0.5, 0.0)), 4.0, 4.0).M == 1);
}

TEST_CASE("tube volume and threshold") {
  CHECK(tube_volume(1, 0.5) == doctest::Approx(M_PI * 0.25));
  CHECK(tube_volume(2, 1.0) == doctest::Approx(M_PI * M_PI / 2));
  CHECK(chain_threshold(1.0, 2.0, 3.0) == doctest::Approx(16.0));
}

TEST_CASE("fitted energy constants bracket the problems they were fitted on") {
  const auto problems = sample_problems(FlowMap(zero_drift(1)), 40, 12, 5.0);
  CHECK(problems.size() == 40);
  const FittedConstant c1 = fit_energy_c1(problems, {12, "calibration", 40});
  CHECK(c1.value >= 1.0);
  for (const ControlProblem& p : problems) CHECK(energy_sandwich_holds(p, c1.value));
  CHECK(fit_control_c2(problems, {12, "calibration", 40}).value > 0.0);
  CHECK_THROWS_AS(sample_problems(FlowMap(zero_drift(1)), -1, 1, 5.0), ArgumentError);
}
