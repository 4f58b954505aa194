// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: acceptance [criterion ...]   (default: all)

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kinetic/cli/commands.hpp"
#include "kinetic/cli/manifest.hpp"
#include "kinetic/control.hpp"
#include "kinetic/errors.hpp"
#include "kinetic/kato.hpp"
#include "kinetic/kde.hpp"
#include "kinetic/kernel.hpp"
#include "kinetic/mollifier.hpp"
#include "kinetic/montecarlo.hpp"
#include "kinetic/parametrix.hpp"
#include "kinetic/particles.hpp"
#include "kinetic/pde.hpp"
#include "kinetic/quadrature.hpp"

using namespace kinetic;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Criterion = std::function<Outcome()>;

// ---- 1: Gaussian kernel exactness -------------------------------------------

Outcome kernel_exactness() {
  Outcome out;
  // Independent mass integral: Gauss-Hermite on y = m + sqrt(2) L u, with the
  // covariance [[2t, t^2], [t^2, 2t^3/3]] factored by hand.
  const int n = 40;
  const auto& gh = quad::gauss_hermite(n);
  double worst_mass = 0.0, worst_inv = 0.0, worst_norm = 0.0;
  for (double t : {0.25, 1.0, 4.0}) {
    const double a = 2.0 * t, b = t * t, c = 2.0 * t * t * t / 3.0;
    const double l11 = std::sqrt(a), l21 = b / l11, l22 = std::sqrt(c - l21 * l21);
    double mass = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double u = gh.nodes[i], v = gh.nodes[j];
        const double y1 = std::sqrt(2.0) * l11 * u, y2 = std::sqrt(2.0) * (l21 * u + l22 * v);
        const double p = kolmogorov_density(1, t, PhasePoint::of(0, 0), PhasePoint::of(y1, y2));
        mass += gh.weights[i] * gh.weights[j] * std::exp(u * u + v * v) * 2.0 * l11 * l22 * p;
      }
    worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
    for (int d : {1, 2, 3}) {
      const KolmogorovKernel K(d, t);
      const Eigen::MatrixXd I = K.covariance() * K.inverse_covariance();
      worst_inv = std::max(worst_inv, (I - Eigen::MatrixXd::Identity(2 * d, 2 * d)).cwiseAbs().maxCoeff());
      const double from_det = std::pow(2.0 * M_PI, -d) / std::sqrt(K.covariance().determinant());
      const double expected = std::pow(std::sqrt(3.0) / (2.0 * M_PI * t * t), d);
      worst_norm = std::max({worst_norm, std::abs(from_det - expected) / expected,
                             std::abs(K.normalizer() - expected) / expected});
    }
  }
  out.pass = worst_mass <= 1e-6 && worst_inv <= 1e-12 && worst_norm <= 1e-12;
  out.detail = fmt::format("mass err {:.2e}, K K^-1 - I {:.2e}, normalizer rel {:.2e}", worst_mass, worst_inv,
                           worst_norm);
  return out;
}

// ---- 2: two-sided sandwich ----------------------------------------------------

struct SandwichCounts {
  long form_bad = 0, density_bad = 0;
  double form_lo = INFINITY, form_hi = -INFINITY;
};

SandwichCounts seeded_sandwich() {
  std::mt19937_64 gen(20240601);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  SandwichCounts c;
  for (int i = 0; i < 10000; ++i) {
    const int d = 1 + i % 3;
    const double t = 0.01 + 4.0 * unit(gen);
    PhasePoint x(d), y(d);
    for (int a = 0; a < 2 * d; ++a) x[a] = 2.0 * normal(gen);
    PhasePoint w(d);
    for (int a = 0; a < 2 * d; ++a) w[a] = normal(gen);
    w.vec() *= 3.0 * unit(gen) / w.vec().norm();
    const KolmogorovKernel K(d, t);
    y = K.mean(x) - ScaleMatrix(t).apply_inverse(w);
    const PhasePoint z = K.mean(x) - y;
    // Form computed from a numerically inverted covariance, not the closed form.
    const double Q = z.vec().dot(K.covariance().inverse() * z.vec());
    const double s = ScaleMatrix(t).norm_sq(z);
    if (s > 0.0) {
      c.form_lo = std::min(c.form_lo, Q / 4.0 / s);
      c.form_hi = std::max(c.form_hi, Q / 4.0 / s);
    }
    if (!(Q / 4.0 >= kFormRateLow * s * (1 - 1e-12) && Q / 4.0 <= kFormRateHigh * s * (1 + 1e-12))) ++c.form_bad;
    const double p = kolmogorov_density(d, t, x, y);
    const DensityBounds b = kolmogorov_bounds(d, t, x, y);
    if (!(p >= b.lower * (1 - 1e-12) && p <= b.upper * (1 + 1e-12))) ++c.density_bad;
  }
  return c;
}

Outcome sandwich_form() {
  const SandwichCounts c = seeded_sandwich();
  return {c.form_bad == 0, fmt::format("{} of 10000 outside; Q/(4|Tz|^2) in [{:.6f}, {:.6f}], rates [{:.6f}, {:.6f}]",
                                       c.form_bad, c.form_lo, c.form_hi, kFormRateLow, kFormRateHigh)};
}

Outcome sandwich_density() {
  const SandwichCounts c = seeded_sandwich();
  return {c.density_bad == 0, fmt::format("{} of 10000 outside the normalized density bounds", c.density_bad)};
}

// ---- 3: Monte Carlo covariance --------------------------------------------------

Outcome mc_covariance() {
  SimulationPlan plan;
  plan.drift = zero_drift(1);
  plan.diffusion = DiffusionSpec::identity(1);
  plan.x0 = PhasePoint::of(0, 0);
  plan.horizon = 1.0;
  plan.dt = 1e-3;
  plan.paths = 1000000;
  plan.seed = 3;
  const PathEnsemble ens = simulate(plan);
  const Moments2 m = sample_moments(ens, ens.times().size() - 1);
  Eigen::Matrix2d expected;
  expected << 2.0, 1.0, 1.0, 2.0 / 3.0;
  double worst = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) worst = std::max(worst, std::abs(m.cov(a, b) - expected(a, b)) / m.cov_std_error(a, b));
  return {worst <= 3.0 && ens.flagged() == 0,
          fmt::format("cov [[{:.5f}, {:.5f}], [., {:.5f}]], max deviation {:.2f} SE", m.cov(0, 0), m.cov(0, 1),
                      m.cov(1, 1), worst)};
}

// ---- 4: Kato evaluator ----------------------------------------------------------

Outcome kato_evaluator() {
  const std::vector<double> ladder{0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
  double worst_rel = 0.0;
  for (int d : {1, 2})
    for (double lambda : {0.5, 1.0, 2.0})
      for (double beta : {0.0, 1.0, 1.5})
        for (double delta : ladder) {
          KatoQuery q;
          q.f = ScalarField::constant(d, 2.0);
          q.lambda = lambda;
          q.beta = beta;
          q.delta = delta;
          q.search = GridSearch::box(d, 1.0, 3);
          const double v = kato_functional(q).value;
          const double ref = kato_constant_closed_form(2.0, lambda, beta, delta, d);
          worst_rel = std::max(worst_rel, std::abs(v - ref) / ref);
        }
  const double alpha = 1.2;
  bool below = true;
  std::vector<double> logs, logv;
  for (double delta : ladder) {
    KatoQuery q;
    q.f = power_law_drift(1, alpha).singular_field().magnitude();
    q.lambda = 1.0;
    q.beta = 1.0;
    q.delta = delta;
    q.search = GridSearch::box(1, 1.0, 5);
    const double v = kato_functional(q).value;
    below = below && v <= kato_power_law_bound(alpha, 1.0, delta, 1);
    logs.push_back(std::log(delta));
    logv.push_back(std::log(v));
  }
  const double n = logs.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < logs.size(); ++i) {
    sx += logs[i];
    sy += logv[i];
    sxx += logs[i] * logs[i];
    sxy += logs[i] * logv[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double expected = 2.0 - 1.5 * alpha;
  return {worst_rel <= 1e-4 && below && std::abs(slope - expected) <= 0.05,
          fmt::format("constant rel err {:.2e}; power law below bound: {}; slope {:.4f} (expected {:.4f})",
                      worst_rel, below ? "yes" : "no", slope, expected)};
}

// ---- 5: Picard contraction ------------------------------------------------------

Outcome picard_contraction() {
  const GaussianTransition trans(FlowMap(zero_drift(1)), DiffusionSpec::identity(1));
  std::vector<VectorField> family;
  for (auto [a, n] : std::vector<std::pair<double, int>>{{1.1, 4}, {1.25, 16}, {1.3, 8}, {1.15, 12}}) {
    PowerLawDrift law{a, {PowerLawTerm{1.0, {}}}};
    family.push_back(MollifiedPowerLaw(law, n, 1).field());
  }
  family.push_back(VectorField::constant(Eigen::VectorXd::Ones(1)));
  PicardOptions opt;
  opt.lambda = 0.25;
  opt.C1 = fit_picard_constant(trans, family, {0.01, 0.05, 0.2}, opt.lambda, 1.0, {5, "picard-calibration", 0});
  opt.smallness_limit = 0.5;
  const PowerLawDrift law{1.2, {PowerLawTerm{1.0, {}}}};
  const VectorField b1 = MollifiedPowerLaw(law, 8, 1).field();
  const double T = required_horizon(b1, opt.C1.value, opt.lambda, 0.5, 1.0);
  const ScalarField f = ScalarField::gaussian(PhasePoint(1), Eigen::Vector2d(0.5, 0.5));
  const GridTemplate grid = GridTemplate::automatic(trans, T, 64, 6);
  const PicardResult res = picard_solve(trans, b1, f, T, grid, opt);
  double worst = 0.0;
  for (size_t k = 1; k < res.history.size(); ++k)
    if (res.history[k - 1] > 0.0) worst = std::max(worst, res.history[k] / res.history[k - 1]);
  const PicardResult free = picard_solve(trans, VectorField::zero(1), f, T, grid, opt);
  const bool one_step = free.history.size() == 2 && free.history[1] == 0.0;
  return {res.smallness <= 0.5 && worst <= 0.55 && one_step,
          fmt::format("C1 {:.4f}, T {:.5f}, C1 K {:.4f}, {} iterations, max ratio {:.4f}; b1 = 0 exact after one "
                      "step: {}",
                      opt.C1.value, T, res.smallness, res.iterations, worst, one_step ? "yes" : "no")};
}

// ---- 6: parametrix improvement ------------------------------------------------

Outcome parametrix_improvement() {
  const double t = 0.25;
  const int n = 8;
  const PowerLawDrift law{1.2, {PowerLawTerm{1.0, {}}}};
  ParametrixConfig cfg{GaussianTransition(FlowMap(zero_drift(1)), DiffusionSpec::identity(1)),
                       MollifiedPowerLaw(law, n, 1).field(), 1, QuadratureMode{16, 20}, std::nullopt, 1.0};
  SimulationPlan plan;
  plan.drift = power_law_drift(1, 1.2);
  plan.diffusion = DiffusionSpec::identity(1);
  plan.x0 = PhasePoint::of(0, 0);
  plan.horizon = t;
  plan.dt = 1e-3;
  plan.paths = 1000000;
  plan.seed = 6;
  plan.singular_mode = SingularMode::mollified(n);
  const PathEnsemble ens = simulate(plan);
  const KdeEstimator kde(ens, ens.time_index(t));
  const int m = 21;
  const double lo = -1.5, hi = 1.5, h = (hi - lo) / (m - 1);
  double d0 = 0.0, d1 = 0.0, se = 0.0;
  for (int i = 0; i < m; ++i) {
    const PhasePoint y = PhasePoint::of(lo + i * h, 0.0);
    const KernelEstimate e = parametrix_series(cfg, 0.0, plan.x0, t, y);
    const KdeValue v = kde(y);
    d0 += std::abs(v.estimate - e.terms[0]) * h;
    d1 += std::abs(v.estimate - e.value) * h;
    se += v.std_error * h;
  }
  return {d0 - d1 >= se,
          fmt::format("L1(KDE, p0) {:.4f}, L1(KDE, p0 + p0 (x) H) {:.4f}, KDE error {:.4f}", d0, d1, se)};
}

// ---- 7: Krylov ratio ----------------------------------------------------------

Outcome krylov_ratio() {
  SimulationPlan plan;
  plan.drift = zero_drift(1);
  plan.diffusion = DiffusionSpec::identity(1);
  plan.x0 = PhasePoint::of(0, 0);
  plan.horizon = 0.5;
  plan.dt = 1e-3;
  plan.paths = 100000;
  plan.record_every = 10;
  KatoQuery q;
  q.lambda = 0.25;
  q.search = GridSearch::box(1, 1.5, 7);
  std::vector<double> cal, test;
  for (bool calibration : {true, false}) {
    plan.seed = calibration ? 70 : 71;
    const PathEnsemble ens = simulate(plan);
    for (const auto& f : cli::krylov_family(calibration))
      (calibration ? cal : test).push_back(krylov_estimate(ens, f, 0.5, q).ratio);
  }
  FittedConstants constants;
  constants.add(fit_max_ratio("C3", cal, {70, "krylov-calibration", 0}));
  const double C3 = constants.use("C3", "krylov-test", 71).value;
  const double worst = *std::max_element(test.begin(), test.end());
  return {worst <= 1.2 * C3, fmt::format("C3 {:.6f}, max test ratio {:.6f} ({:.3f} C3)", C3, worst, worst / C3)};
}

// ---- 8: control and Gramian ----------------------------------------------------

Outcome control_gramian() {
  const FlowMap fm(zero_drift(1));
  Eigen::Matrix2d expected;
  expected << 1.0, 0.5, 0.5, 1.0 / 3.0;
  const double g_err = (gramian(fm, 0.0, 1.0) - expected).cwiseAbs().maxCoeff();
  const ControlProblem unit{fm, 0.0, 1.0, PhasePoint::of(0, 0), PhasePoint::of(0, 1)};
  const double i2_err = std::abs(std::pow(energy(unit), 2) - 12.0);
  double num_err = std::abs(energy_numeric(unit, 200).energy - energy(unit));

  const auto cal = sample_problems(fm, 60, 81, 10.0);
  FittedConstants constants;
  constants.add(fit_energy_c1(cal, {81, "energy-calibration", 0}));
  constants.add(fit_control_c2(cal, {81, "energy-calibration", 0}));
  const double c1 = constants.use("c1", "energy-test", 82).value;
  const double c2 = constants.use("c2", "energy-test", 82).value;
  const auto test = sample_problems(fm, 60, 82, 10.0);
  long sandwich_bad = 0;
  for (size_t i = 0; i < test.size(); ++i) {
    if (!energy_sandwich_holds(test[i], c1)) ++sandwich_bad;
    if (i < 5) num_err = std::max(num_err, std::abs(energy_numeric(test[i], 200).energy - energy(test[i])));
  }
  const auto far = sample_problems(fm, 100, 83, 12.0, 0.1, 1.0, 3.0);
  long chain_bad = 0;
  int max_steps = 0;
  for (const auto& p : far) {
    try {
      max_steps = std::max(max_steps, build_chain(p, c1, c2).M);
    } catch (const ConstructionError&) {
      ++chain_bad;
    }
  }
  return {g_err <= 1e-10 && i2_err <= 1e-8 && num_err <= 1e-3 && sandwich_bad == 0 && chain_bad == 0,
          fmt::format("G err {:.1e}, I^2 err {:.1e}, numeric err {:.1e}, sandwich misses {} (c1 {:.3f}), chain "
                      "failures {} of 100 (c2 {:.3f}, up to {} steps)",
                      g_err, i2_err, num_err, sandwich_bad, c1, chain_bad, c2, max_steps)};
}

// ---- 9: particle system --------------------------------------------------------

Outcome particle_system() {
  ParticleSystemPlan plan;
  plan.particles = 4;
  plan.d = 2;
  plan.alpha = 1.2;
  plan.gamma.assign(4, 1.0);
  plan.dt = 1e-4;
  plan.horizon = 1.0;
  plan.paths = 1000;
  plan.seed = 9;
  plan.singular_mode = SingularMode::mollified(8);
  const ParticleEnsemble ens = simulate_particles(plan);
  const double closest = *std::min_element(ens.min_distance.begin(), ens.min_distance.end());
  return {ens.flagged == 0 && closest > 0.0 && static_cast<long>(ens.min_distance.size()) == plan.paths,
          fmt::format("{} flagged, smallest pair distance {:.4f}", ens.flagged, closest)};
}

// ---- 10: reproducibility -------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome reproducibility() {
  const std::map<std::string, std::string> configs{
      {"kernel-eval", "[kernel-eval]\npoints = 200\n"},
      {"kato-eval", "[kato-eval]\nfield = power_law\ndeltas = 0.1, 0.5\n"},
      {"picard-solve", "[picard-solve]\nnodes = 16\ntime_slices = 4\n"},
      {"parametrix",
       "[parametrix]\nintegrator = importance\nsamples = 10000\ny_points = 5\ncompare_paths = 10000\n"},
      {"simulate", "[simulate]\npaths = 2000\nrecord_every = 100\ndrift = power_law\n"},
      {"particles", "[particles]\npaths = 20\nhorizon = 0.05\n"},
      {"verify-bounds", "[verify-bounds]\npaths = 20000\n"},
      {"krylov", "[krylov]\npaths = 2000\n"},
      {"energy", "[energy]\nproblems = 10\ntest_problems = 10\nnumeric_cases = 1\n"},
      {"chain", "[chain]\ncases = 10\ncalibration = 10\n"},
      {"selftest", ""}};
  const auto root = std::filesystem::temp_directory_path() / "kinetic_reproducibility";
  std::filesystem::remove_all(root);
  std::vector<std::string> differing;
  long compared = 0;
  std::ostringstream sink;
  for (const auto& name : cli::command_names()) {
    std::vector<std::vector<std::pair<std::string, std::string>>> runs;
    for (const char* tag : {"a", "b"}) {
      cli::RunOptions o;
      o.command = name;
      o.config_text = configs.count(name) ? configs.at(name) : "";
      o.seed = 42;
      o.out_dir = (root / tag).string();
      cli::run(o, sink);
      const auto m = cli::RunManifest::parse(slurp(root / tag / (name + "-manifest.json")));
      std::vector<std::pair<std::string, std::string>> files;
      for (const auto& a : m.artifacts)
        if (a.size() > 4 && a.substr(a.size() - 4) == ".csv") files.emplace_back(a, slurp(root / tag / a));
      runs.push_back(files);
    }
    if (runs[0] != runs[1] || runs[0].empty()) differing.push_back(name);
    compared += static_cast<long>(runs[0].size());
  }
  std::string list;
  for (const auto& n : differing) list += " " + n;
  return {differing.empty(), fmt::format("{} CSV artifacts over {} subcommands compared; differing:{}", compared,
                                         cli::command_names().size(), differing.empty() ? " none" : list)};
}

struct Entry {
  std::string id;
  std::string title;
  double time_limit;  // seconds, <= 0 = none
  Criterion run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Entry> entries{
      {"1", "kernel exactness", 1.0, kernel_exactness},
      {"2a", "form sandwich with exact rates", 1.0, sandwich_form},
      {"2b", "density sandwich", 1.0, sandwich_density},
      {"3", "Monte Carlo covariance", 60.0, mc_covariance},
      {"4", "Kato evaluator", 30.0, kato_evaluator},
      {"5", "Picard contraction", 120.0, picard_contraction},
      {"6", "parametrix improvement", 600.0, parametrix_improvement},
      {"7", "Krylov ratio", 300.0, krylov_ratio},
      {"8", "control and Gramian", 0.0, control_gramian},
      {"9", "particle system", 600.0, particle_system},
      {"10", "reproducibility", 0.0, reproducibility}};
  std::set<std::string> wanted(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& e : entries) {
    const std::string group = e.id.substr(0, e.id.find_first_not_of("0123456789"));
    if (!wanted.empty() && !wanted.count(e.id) && !wanted.count(group)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = e.run();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = e.time_limit <= 0.0 || secs < e.time_limit;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    fmt::print("{} {:>3} {}: {} [{:.2f} s{}]\n", pass ? "PASS" : "FAIL", e.id, e.title, o.detail, secs,
               e.time_limit > 0.0 ? fmt::format(" < {:.0f} s", e.time_limit) + (in_time ? "" : " EXCEEDED") : "");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
