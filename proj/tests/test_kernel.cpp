#include <doctest.h>

#include <cmath>
#include <random>

#include "kinetic/errors.hpp"
#include "kinetic/kernel.hpp"
#include "kinetic/quadrature.hpp"

using namespace kinetic;

namespace {

// int p(0, x; s, z) p(s, z; t, y) dz by Gauss-Hermite in coordinates whitened by K_s (d = 1).
double chapman_kolmogorov(double s, double t, const PhasePoint& x, const PhasePoint& y) {
  const KolmogorovKernel K(1, s);
  const Eigen::Matrix2d L = K.covariance().llt().matrixL();
  const PhasePoint m = K.mean(x);
  const auto& gh = quad::gauss_hermite(96);
  double total = 0.0;
  for (int i = 0; i < gh.size(); ++i)
    for (int j = 0; j < gh.size(); ++j) {
      const Eigen::Vector2d u(gh.nodes[i], gh.nodes[j]);
      const PhasePoint z = PhasePoint::stacked(m.vec() + std::sqrt(2.0) * L * u);
      total += gh.weights[i] * gh.weights[j] / M_PI * kolmogorov_density(1, t - s, z, y);
    }
  return total;
}

}  // namespace

TEST_CASE("kernel at the origin") {
  CHECK(kolmogorov_density(1, 1.0, PhasePoint::of(0, 0), PhasePoint::of(0, 0)) ==
        doctest::Approx(std::sqrt(3.0) / (2.0 * M_PI)));
  // Q = 2 for y = (1, 0) at t = 1
  const KolmogorovKernel K(1, 1.0);
  CHECK(K.quadratic_form(PhasePoint::of(1, 0)) == doctest::Approx(2.0));
  CHECK(kolmogorov_density(1, 1.0, PhasePoint::of(0, 0), PhasePoint::of(1, 0)) ==
        doctest::Approx(std::sqrt(3.0) / (2.0 * M_PI) * std::exp(-1.0)));
}

TEST_CASE("covariance, inverse and determinant in closed form") {
  for (int d : {1, 2, 3})
    for (double t : {0.01, 0.5, 3.0}) {
      const KolmogorovKernel K(d, t);
      const Eigen::MatrixXd C = K.covariance();
      CHECK(C(0, 0) == doctest::Approx(2.0 * t));
      CHECK(C(0, d) == doctest::Approx(t * t));
      CHECK(C(d, d) == doctest::Approx(2.0 * t * t * t / 3.0));
      CHECK((C * K.inverse_covariance() - Eigen::MatrixXd::Identity(2 * d, 2 * d)).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(K.determinant() == doctest::Approx(C.determinant()).epsilon(1e-12));
      CHECK(K.normalizer() == doctest::Approx(std::pow(std::sqrt(3.0) / (2.0 * M_PI * t * t), d)).epsilon(1e-13));
    }
}

TEST_CASE("quadratic form sandwich for random offsets") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n;
  for (int i = 0; i < 2000; ++i) {
    const int d = 1 + i % 2;
    const double t = std::exp(n(gen));
    PhasePoint z(d);
    for (int a = 0; a < 2 * d; ++a) z[a] = n(gen);
    const double q = KolmogorovKernel(d, t).quadratic_form(z) / 4.0;
    const double s = ScaleMatrix(t).norm_sq(z);
    CHECK(q >= kFormRateLow * s * (1 - 1e-12));
    CHECK(q <= kFormRateHigh * s * (1 + 1e-12));
  }
}

TEST_CASE("form rates are attained by the scaled quadratic form") {
  // t-independent in scaled coordinates; eigenvalues of [[2,1],[1,2/3]]^{-1} / 4 are the rates.
  const Eigen::Matrix2d K0 = KolmogorovKernel(1, 1.0).covariance();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(K0.inverse() / 4.0);
  CHECK(es.eigenvalues()[0] == doctest::Approx(kFormRateLow).epsilon(1e-12));
  CHECK(es.eigenvalues()[1] == doctest::Approx(kFormRateHigh).epsilon(1e-12));
}

TEST_CASE("density lies between its Gaussian bounds") {
  const PhasePoint x = PhasePoint::of(0.3, -0.2);
  for (double t : {0.1, 1.0})
    for (double y1 : {-2.0, 0.0, 1.5}) {
      const PhasePoint y = PhasePoint::of(y1, 0.4);
      const DensityBounds b = kolmogorov_bounds(1, t, x, y);
      const double p = kolmogorov_density(1, t, x, y);
      CHECK(p >= b.lower * (1 - 1e-12));
      CHECK(p <= b.upper * (1 + 1e-12));
    }
}

TEST_CASE("Chapman-Kolmogorov identity") {
  const PhasePoint x = PhasePoint::of(0.2, -0.1), y = PhasePoint::of(-0.4, 0.3);
  CHECK(chapman_kolmogorov(0.4, 1.0, x, y) == doctest::Approx(kolmogorov_density(1, 1.0, x, y)).epsilon(1e-12));
}

TEST_CASE("eta and g kernel") {
  const KernelParams p{2.0, 1.0, 1};
  const PhasePoint z = PhasePoint::of(0.5, 0.25);
  // t = 0.25: T z = (1, 2)
  CHECK(eta(p, 0.25, z) == doctest::Approx(std::pow(0.25, -0.5 - 2.0) * std::exp(-10.0)));
  const FlowMap free(zero_drift(1));
  const PhasePoint x = PhasePoint::of(1.0, 0.0), y = PhasePoint::of(0.5, 0.3);
  // theta_{1,0}(x) = (1, 1)
  CHECK(g_kernel(p, free, 0.0, x, 1.0, y) == doctest::Approx(eta(p, 1.0, PhasePoint::of(0.5, 0.7))));
  CHECK_THROWS_AS(eta(p, 0.0, z), DomainError);
  CHECK_THROWS(KernelParams{-1.0, 0.0, 1}.validate());
}
