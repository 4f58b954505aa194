#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "kinetic/ensemble_io.hpp"
#include "kinetic/errors.hpp"
#include "kinetic/kde.hpp"
#include "kinetic/kernel.hpp"
#include "kinetic/montecarlo.hpp"
#include "kinetic/particles.hpp"

using namespace kinetic;

namespace {

SimulationPlan free_plan(long paths, uint64_t seed) {
  SimulationPlan p;
  p.drift = zero_drift(1);
  p.diffusion = DiffusionSpec::identity(1);
  p.x0 = PhasePoint(1);
  p.horizon = 1.0;
  p.dt = 0.01;
  p.paths = paths;
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("Euler-Maruyama reproduces the free covariance") {
  const PathEnsemble ens = simulate(free_plan(40000, 3));
  const Moments2 m = sample_moments(ens, ens.time_index(1.0));
  const Eigen::MatrixXd C = KolmogorovKernel(1, 1.0).covariance();
  for (int a = 0; a < 2; ++a) {
    CHECK(std::abs(m.mean[a]) < 5.0 * std::sqrt(C(a, a) / 40000));
    for (int b = 0; b < 2; ++b)
      // 5 standard errors plus the O(dt) discretization bias of the position block.
      CHECK(std::abs(m.cov(a, b) - C(a, b)) < 5.0 * m.cov_std_error(a, b) + 0.02);
  }
}

TEST_CASE("simulation is reproducible from the seed") {
  const PathEnsemble a = simulate(free_plan(500, 9)), b = simulate(free_plan(500, 9)), c = simulate(free_plan(500, 10));
  CHECK(a.raw_states() == b.raw_states());
  CHECK(a.raw_states() != c.raw_states());
}

TEST_CASE("ensemble file round trip") {
  SimulationPlan plan = free_plan(200, 4);
  plan.record_every = 25;
  const PathEnsemble ens = simulate(plan);
  CHECK(ens.times().size() == 5);
  const auto path = std::filesystem::temp_directory_path() / "kinetic_ensemble_roundtrip.bin";
  write_ensemble(path.string(), ens);
  const PathEnsemble back = read_ensemble(path.string());
  std::filesystem::remove(path);
  CHECK(back.dim() == 1);
  CHECK(back.seed() == 4);
  CHECK(back.times() == ens.times());
  CHECK(back.raw_states() == ens.raw_states());
  CHECK(back.raw_drift_integral() == ens.raw_drift_integral());
}

TEST_CASE("constant control shifts the mean velocity") {
  SimulationPlan plan = free_plan(2000, 5);
  const ControlPath h = ControlPath::constant(0.0, 1.0, Eigen::VectorXd::Constant(1, 0.7));
  CHECK(h.energy() == doctest::Approx(0.49));
  const PathEnsemble ctl = simulate_controlled(plan, h), raw = simulate(plan);
  const size_t ti = raw.time_index(1.0);
  const double shift_v = sample_moments(ctl, ti).mean[0] - sample_moments(raw, ti).mean[0];
  const double shift_x = sample_moments(ctl, ti).mean[1] - sample_moments(raw, ti).mean[1];
  CHECK(shift_v == doctest::Approx(0.7).epsilon(1e-9));
  CHECK(shift_x == doctest::Approx(0.35).epsilon(0.02));
}

TEST_CASE("kernel density estimate of the free law") {
  const PathEnsemble ens = simulate(free_plan(40000, 6));
  const size_t ti = ens.time_index(1.0);
  const KdeEstimator kde(ens, ti);
  CHECK(kde.mass(6.0, 60) == doctest::Approx(1.0).epsilon(1e-6));
  const KdeValue v = kde(PhasePoint(1));
  const double exact = kolmogorov_density(1, 1.0, PhasePoint(1), PhasePoint(1));
  // Smoothing lowers the peak; allow for it on top of the noise.
  CHECK(std::abs(v.estimate - exact) < 4.0 * v.std_error + 0.1 * exact);
}

TEST_CASE("Krylov ratio for a Gaussian bump") {
  SimulationPlan plan = free_plan(5000, 8);
  plan.record_every = 1;
  const PathEnsemble ens = simulate(plan);
  KatoQuery q;
  q.search = FixedPoint{0.0, PhasePoint(1)};
  q.nodes = {16, 16};
  const KrylovResult r = krylov_estimate(ens, ScalarField::gaussian(PhasePoint(1), Eigen::Vector2d(0.5, 0.5)), 1.0, q);
  CHECK(r.mc_value > 0.0);
  CHECK(r.kato_value > 0.0);
  CHECK(r.ratio == doctest::Approx(r.mc_value / r.kato_value));
}

TEST_CASE("non-finite drift aborts the run") {
  SimulationPlan plan = free_plan(100, 1);
  plan.drift.regular = CallableDrift{
      [](double, std::span<const double>, std::span<double> out) { out[0] = std::numeric_limits<double>::quiet_NaN(); }};
  CHECK_THROWS_AS(simulate(plan), RunError);
}

TEST_CASE("small particle system stays separated") {
  ParticleSystemPlan p;
  p.particles = 3;
  p.gamma = {0.5, 0.5, 0.5};
  p.dt = 1e-3;
  p.horizon = 0.1;
  p.paths = 50;
  p.record_every = 20;
  const ParticleEnsemble e = simulate_particles(p);
  CHECK(e.flagged == 0);
  CHECK(e.paths == 50);
  CHECK(e.times.size() == e.kinetic_energy.size());
  for (double m : e.min_distance) CHECK(m > 0.0);
}
