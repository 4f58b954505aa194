#include <doctest.h>

#include <cmath>

#include "kinetic/errors.hpp"
#include "kinetic/kato.hpp"

using namespace kinetic;

namespace {

KatoEstimate at_origin(const ScalarField& f, double lambda, double beta, double delta, int d = 1) {
  KatoQuery q;
  q.f = f;
  q.lambda = lambda;
  q.beta = beta;
  q.delta = delta;
  q.search = FixedPoint{0.0, PhasePoint(d)};
  return kato_functional(q);
}

}  // namespace

TEST_CASE("constant field matches the closed form") {
  for (int d : {1, 2})
    for (double beta : {0.0, 1.0, 1.5}) {
      const KatoEstimate e = at_origin(ScalarField::constant(d, 3.0), 0.8, beta, 0.3, d);
      CHECK(e.value == doctest::Approx(kato_constant_closed_form(3.0, 0.8, beta, 0.3, d)).epsilon(1e-8));
    }
}

TEST_CASE("power law: exact value, bound and search") {
  const double alpha = 1.2, lambda = 1.0, delta = 0.2;
  const ScalarField f = power_law_drift(1, alpha).singular_field().magnitude();
  const double exact = kato_power_law_exact(alpha, lambda, 1.0, delta, 1);
  CHECK(at_origin(f, lambda, 1.0, delta).value == doctest::Approx(exact).epsilon(1e-4));
  CHECK(exact <= kato_power_law_bound(alpha, lambda, delta, 1));

  // The supremum sits on x2 = 0; a grid search must not exceed it.
  KatoQuery q;
  q.f = f;
  q.lambda = lambda;
  q.delta = delta;
  q.search = GridSearch::box(1, 1.0, 5);
  const KatoEstimate g = kato_functional(q);
  CHECK(g.value <= exact * (1 + 1e-4));
  CHECK(g.value >= exact * (1 - 1e-3));
}

TEST_CASE("power-law exact value scales like delta to the slope exponent") {
  const double alpha = 1.2;
  const double r = kato_power_law_exact(alpha, 1.0, 1.0, 0.01, 2) / kato_power_law_exact(alpha, 1.0, 1.0, 0.001, 2);
  CHECK(std::log10(r) == doctest::Approx(2.0 - 1.5 * alpha).epsilon(1e-12));
}

TEST_CASE("Holder improvement is tight for constants") {
  // K(|c|^gamma) = c^gamma K(1), and the bound collapses to c K(1).
  const double c = 2.5, gamma = 3.0, beta = 1.0, lambda = 0.7, r = 0.4;
  const double k1 = kato_constant_closed_form(1.0, lambda, beta, r, 1);
  const double bound = holder_improvement_bound(gamma, std::pow(c, gamma) * k1, beta, lambda, r, 1);
  CHECK(bound == doctest::Approx(c * k1).epsilon(1e-12));
  CHECK_THROWS_AS(holder_improvement_bound(1.0, 1.0, beta, lambda, r, 1), DomainError);
}

TEST_CASE("local L1 bound dominates the tube integral") {
  const double delta = 0.3, lambda = 0.5, beta = 1.0;
  for (const ScalarField& f : {ScalarField::constant(1, 1.0), power_law_drift(1, 1.25).singular_field().magnitude()}) {
    const KatoEstimate e = at_origin(f, lambda, beta, delta);
    const double tube = local_tube_integral(f, 0.0, PhasePoint(1), delta, 48);
    CHECK(tube > 0.0);
    CHECK(local_l1_from_kato(e, delta, lambda, beta, 1) >= tube);
  }
  // Constant field: 4 * delta * 2 sqrt(delta) * 2 delta^{3/2}.
  CHECK(local_tube_integral(ScalarField::constant(1, 1.0), 0.0, PhasePoint(1), delta) ==
        doctest::Approx(16.0 * delta * delta * delta));
}

TEST_CASE("mixed-norm bound") {
  MixedNormSpec spec;
  spec.p = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  CHECK(spec.kappa() == doctest::Approx(2.0));
  // p = q = inf reduces to the constant closed form with delta = T.
  const double b = mixed_norm_kato_bound(spec, 1.5, 1.0, 0.4, 0.9);
  CHECK(b == doctest::Approx(kato_constant_closed_form(1.5, 0.9, 1.0, 0.4, 1)).epsilon(1e-12));
  spec.p = {1.0, 1.0};
  CHECK_THROWS_AS(mixed_norm_kato_bound(spec, 1.0, 1.0, 0.4, 0.9), PreconditionError);
}

TEST_CASE("convolution integral is linear in the field and needs s < t") {
  const FlowMap free(zero_drift(1));
  const PhasePoint x = PhasePoint::of(0.1, 0.0), y = PhasePoint::of(0.3, 0.2);
  const double a = convolution_lhs(free, 1.0, 0.0, 1.0, ScalarField::constant(1, 1.0), 0.0, x, 0.5, y, 8, 8);
  const double b = convolution_lhs(free, 1.0, 0.0, 1.0, ScalarField::constant(1, 2.0), 0.0, x, 0.5, y, 8, 8);
  CHECK(a > 0.0);
  CHECK(b == doctest::Approx(2.0 * a).epsilon(1e-13));
  CHECK(convolution_lhs(free, 1.0, 0.0, 1.0, ScalarField::zero(1), 0.0, x, 0.5, y, 8, 8) == 0.0);
  CHECK_THROWS_AS(convolution_lhs(free, 1.0, 0.0, 1.0, ScalarField::zero(1), 0.5, x, 0.5, y), DomainError);
  CHECK_THROWS_AS(convolution_lhs(free, 1.0, 1.0, 0.0, ScalarField::zero(1), 0.0, x, 0.5, y), PreconditionError);
  CHECK(convolution_kappa(0.5) == doctest::Approx(1.0));
}
