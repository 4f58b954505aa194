#include <doctest.h>

#include <cmath>

#include "kinetic/errors.hpp"
#include "kinetic/kernel.hpp"
#include "kinetic/parametrix.hpp"

using namespace kinetic;

namespace {

GaussianTransition free_transition(int d = 1) { return {FlowMap(zero_drift(d)), DiffusionSpec::identity(d)}; }

ParametrixConfig config(VectorField b1, int order, ParametrixIntegrator integ = QuadratureMode{}) {
  return ParametrixConfig{free_transition(b1.d), std::move(b1), order, integ, std::nullopt, 1.0};
}

VectorField constant_drift(double c) { return VectorField::constant(Eigen::VectorXd::Constant(1, c)); }

// Even in z: b1(z) = 1 / (1 + z2^2).
VectorField even_drift() {
  return VectorField{[](double, std::span<const double> z, std::span<double> out) { out[0] = 1.0 / (1.0 + z[1] * z[1]); },
                     1, true, std::nullopt};
}

}  // namespace

TEST_CASE("H kernel in closed form") {
  const ParametrixConfig cfg = config(constant_drift(1.0), 1);
  const double h = h_kernel(cfg, 0.0, PhasePoint::of(0, 0), 1.0, PhasePoint::of(1, 0));
  CHECK(h == doctest::Approx(-std::sqrt(3.0) / (2.0 * M_PI) * std::exp(-1.0)).epsilon(1e-12));
  CHECK_THROWS_AS(h_kernel(cfg, 1.0, PhasePoint::of(0, 0), 1.0, PhasePoint::of(1, 0)), DomainError);
}

TEST_CASE("Gaussian bridge pins both endpoints") {
  const GaussianTransition tr = free_transition();
  const PhasePoint x = PhasePoint::of(0.2, 0.1), y = PhasePoint::of(-0.5, 0.4);
  const Bridge early = gaussian_bridge(tr, 0.0, x, 1e-6, 1.0, y);
  CHECK((early.mean - x.vec()).norm() < 1e-5);
  const Bridge late = gaussian_bridge(tr, 0.0, x, 1.0 - 1e-6, 1.0, y);
  CHECK((late.mean - y.vec()).norm() < 1e-5);
}

TEST_CASE("first term vanishes for an even drift at the origin") {
  const ParametrixConfig cfg = config(even_drift(), 1, QuadratureMode{12, 12});
  const KernelEstimate e = parametrix_series(cfg, 0.0, PhasePoint::of(0, 0), 0.5, PhasePoint::of(0, 0));
  CHECK(std::abs(e.terms[1]) < 1e-12 * e.terms[0]);
}

TEST_CASE("constant drift series reproduces the shifted kernel") {
  const double c = 0.3, tau = 0.5;
  const PhasePoint x = PhasePoint::of(0.1, -0.2), y = PhasePoint::of(0.4, 0.1);
  const ParametrixConfig cfg = config(constant_drift(c), 2, QuadratureMode{8, 8});
  const KernelEstimate e = parametrix_series(cfg, 0.0, x, tau, y);
  const double exact = kolmogorov_density(1, tau, x, y - PhasePoint::of(c * tau, 0.5 * c * tau * tau));
  CHECK(e.value == doctest::Approx(exact).epsilon(2e-3));
  CHECK(std::abs(e.value - exact) < std::abs(e.terms[0] - exact));
}

TEST_CASE("importance sampling agrees with quadrature") {
  const PhasePoint x = PhasePoint::of(0.0, 0.0), y = PhasePoint::of(0.5, 0.2);
  const KernelEstimate q = parametrix_series(config(constant_drift(0.8), 1, QuadratureMode{16, 16}), 0.0, x, 0.5, y);
  const KernelEstimate m =
      parametrix_series(config(constant_drift(0.8), 1, ImportanceMode{200000, 11}), 0.0, x, 0.5, y);
  REQUIRE(m.term_errors[1] > 0.0);
  CHECK(std::abs(m.terms[1] - q.terms[1]) < 4.0 * m.term_errors[1]);
  // Same seed, same estimate.
  const KernelEstimate again =
      parametrix_series(config(constant_drift(0.8), 1, ImportanceMode{200000, 11}), 0.0, x, 0.5, y);
  CHECK(again.terms[1] == m.terms[1]);
}

TEST_CASE("configuration validation") {
  CHECK_THROWS_AS(config(VectorField::zero(2), 1).validate(), ArgumentError);
  CHECK_THROWS_AS(config(constant_drift(1.0), 0).validate(), ArgumentError);
  CHECK_THROWS_AS(config(constant_drift(1.0), 1, ImportanceMode{100, 1}).validate(), ArgumentError);
}
