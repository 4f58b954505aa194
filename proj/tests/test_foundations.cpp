#include <doctest.h>

#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "kinetic/errors.hpp"
#include "kinetic/fitted.hpp"
#include "kinetic/grid.hpp"
#include "kinetic/mollifier.hpp"
#include "kinetic/phase_point.hpp"
#include "kinetic/quadrature.hpp"
#include "kinetic/rng.hpp"

using namespace kinetic;

TEST_CASE("scale matrix and anisotropic distance") {
  const PhasePoint x = PhasePoint::of(0.5, 8.0);
  CHECK(aniso_distance(x) == doctest::Approx(2.0));
  CHECK(aniso_distance(PhasePoint::of(-3.0, 1.0)) == doctest::Approx(3.0));
  const ScaleMatrix T(4.0);
  // x1 / 2, x2 / 8
  CHECK(T.norm_sq(x) == doctest::Approx(0.0625 + 1.0));
  const PhasePoint back = T.apply_inverse(T.apply(x));
  CHECK(back[0] == doctest::Approx(0.5));
  CHECK(back[1] == doctest::Approx(8.0));
}

TEST_CASE("scaling homogeneity of the anisotropic distance") {
  // |(r x1, r^3 x2)|_d = r |x|_d
  for (double r : {0.1, 0.7, 3.0}) {
    const PhasePoint x(Eigen::Vector2d(0.3, -1.1), Eigen::Vector2d(2.0, 0.4));
    const PhasePoint y(r * x.x1(), r * r * r * x.x2());
    CHECK(aniso_distance(y) == doctest::Approx(r * aniso_distance(x)).epsilon(1e-12));
  }
}

TEST_CASE("philox known answers") {
  using rng::philox4x32;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == rng::Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        rng::Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        rng::Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("normal quantile agrees with boost") {
  const boost::math::normal_distribution<double> n;
  for (double p : {1e-12, 1e-6, 0.01, 0.2, 0.5, 0.8, 0.975, 1 - 1e-9}) {
    const double ref = boost::math::quantile(n, p);
    CHECK(rng::normal_quantile(p) == doctest::Approx(ref).epsilon(1e-13));
  }
}

TEST_CASE("streams are addressable and independent of call order") {
  rng::NormalStream a(7, 3), b(7, 3), c(7, 4);
  const double late = a.at(1001);
  for (int i = 0; i < 1001; ++i) b.at(i);
  CHECK(b.at(1001) == late);
  CHECK(c.at(1001) != late);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = a.at(i);
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(sq / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  rng::UniformStream u(7, 3);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.at(i);
    CHECK((v > 0.0 && v < 1.0));
  }
}

TEST_CASE("gaussian rules integrate polynomials exactly") {
  const auto& gh = quad::gauss_hermite(10);
  double m4 = 0.0;
  for (int i = 0; i < gh.size(); ++i) m4 += gh.weights[i] * std::pow(gh.nodes[i], 4);
  CHECK(m4 == doctest::Approx(0.75 * std::sqrt(M_PI)).epsilon(1e-13));

  const auto& gl = quad::gauss_legendre(5);
  double m2 = 0.0;
  for (int i = 0; i < gl.size(); ++i) m2 += gl.weights[i] * gl.nodes[i] * gl.nodes[i];
  CHECK(m2 == doctest::Approx(2.0 / 3.0).epsilon(1e-14));

  // int (1-x)^{1/2} dx on [-1, 1]
  const auto& gj = quad::gauss_jacobi(8, 0.5, 0.0);
  double mass = 0.0;
  for (double w : gj.weights) mass += w;
  CHECK(mass == doctest::Approx(std::pow(2.0, 1.5) / 1.5).epsilon(1e-13));
}

TEST_CASE("double-exponential rules handle endpoint singularities") {
  const auto ts = quad::tanh_sinh_left_on(60, 0.0, 1.0);
  double v = 0.0;
  for (int i = 0; i < ts.size(); ++i) v += ts.weights[i] / std::sqrt(ts.nodes[i]);
  CHECK(v == doctest::Approx(2.0).epsilon(1e-8));

  const auto es = quad::exp_sinh_gaussian(60, 2.0);
  double g = 0.0, h = 0.0;
  for (int i = 0; i < es.size(); ++i) {
    g += es.weights[i];
    h += es.weights[i] * std::pow(es.nodes[i], -0.3);
  }
  CHECK(g == doctest::Approx(0.5 * std::sqrt(M_PI / 2.0)).epsilon(1e-9));
  // int_0^inf u^{-0.3} e^{-2u^2} du = Gamma(0.35) / (2 * 2^{0.35})
  CHECK(h == doctest::Approx(std::tgamma(0.35) / (2.0 * std::pow(2.0, 0.35))).epsilon(1e-8));
}

TEST_CASE("tensor grid indexing and multilinear interpolation") {
  const TensorGrid grid({{-1.0, 1.0, 5}, {0.0, 2.0, 3}});
  CHECK(grid.size() == 15);
  int idx[2];
  for (size_t f = 0; f < grid.size(); ++f) {
    grid.multi_index(f, idx);
    CHECK(grid.flat_index(idx) == f);
  }
  GridValues vals(grid, 1);
  for (size_t f = 0; f < grid.size(); ++f) {
    const auto x = grid.node(f);
    vals.at(f, 0) = 2.0 * x[0] - 3.0 * x[1] + 1.0;
  }
  const double p[2] = {0.37, 1.21};
  CHECK(vals.interpolate_component(p, 0) == doctest::Approx(2.0 * 0.37 - 3.0 * 1.21 + 1.0));
  // Outside the box the value is clamped to the boundary.
  const double q[2] = {5.0, 1.0};
  CHECK(vals.interpolate_component(q, 0) == doctest::Approx(2.0 - 3.0 + 1.0));
}

TEST_CASE("mollifier kernels are normalized") {
  CHECK(Mollifier(4, 1).mass() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(Mollifier(8, 2).mass() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(bump(1.0) == 0.0);
  CHECK(bump(0.0) > 0.0);
  CHECK(radial_bump(1.2, 2) == 0.0);
}

TEST_CASE("mollified power law approaches the raw kernel away from the centre") {
  PowerLawDrift law{1.2, {PowerLawTerm{1.0, {}}}};
  for (int d : {1, 2}) {
    MollifiedPowerLaw m(law, 16, d);
    std::vector<double> w(d, 0.0), out(d);
    w[0] = 0.8;
    m.kernel(w, out);
    CHECK(out[0] == doctest::Approx(std::pow(0.8, -0.2)).epsilon(2e-3));
    // Odd kernel: zero at the centre, bounded nearby.
    std::fill(w.begin(), w.end(), 0.0);
    m.kernel(w, out);
    CHECK(std::abs(out[0]) < 1e-12);
  }
}

TEST_CASE("fitted constants refuse their own calibration set") {
  FittedConstants fc;
  fc.add(fit_max_ratio("C", {0.5, 2.0, 1.5}, {3, "calibration", 0}));
  CHECK(fc.get("C").value == 2.0);
  CHECK(fc.get("C").calibration.sample_count == 3);
  CHECK(fc.get("C").fingerprint() == "C=2@calibration/seed3/n3");
  CHECK_THROWS_AS(fc.use("C", "calibration", 9), PreconditionError);
  CHECK_THROWS_AS(fc.use("C", "test", 3), PreconditionError);
  CHECK(fc.use("C", "test", 4).value == 2.0);
  CHECK(fit_min_ratio("c", {0.5, 2.0}, {}).value == 0.5);
  CHECK_THROWS_AS(fit_max_ratio("c", {}, {}), ArgumentError);
}
