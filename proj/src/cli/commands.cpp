#include "kinetic/cli/commands.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <map>

#include "kinetic/cli/csv.hpp"
#include "kinetic/cli/manifest.hpp"
#include "kinetic/control.hpp"
#include "kinetic/ensemble_io.hpp"
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
#include "kinetic/rng.hpp"

namespace kinetic::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ---- schema ----------------------------------------------------------------

KeySpec real(std::string name, std::string def) { return {std::move(name), KeyType::real, std::move(def), {}}; }
KeySpec integer(std::string name, std::string def) { return {std::move(name), KeyType::integer, std::move(def), {}}; }
KeySpec list(std::string name, std::string def) { return {std::move(name), KeyType::real_list, std::move(def), {}}; }
KeySpec boolean(std::string name, std::string def) { return {std::move(name), KeyType::boolean, std::move(def), {}}; }
KeySpec choice(std::string name, std::string def, std::vector<std::string> choices) {
  return {std::move(name), KeyType::text, std::move(def), std::move(choices)};
}

SectionSchema with_seed(SectionSchema keys) {
  keys.push_back(integer("seed", "1"));
  return keys;
}

std::vector<KeySpec> drift_keys(const std::string& default_drift) {
  return {integer("d", "1"),
          choice("drift", default_drift, {"zero", "damped", "power_law"}),
          real("damping", "0.5"),
          real("alpha", "1.2"),
          real("gamma", "1"),
          choice("mode", "mollified", {"mollified", "tamed", "exact"}),
          integer("mollifier_n", "8"),
          list("x1", "0"),
          list("x2", "0")};
}

SectionSchema concat(std::vector<KeySpec> a, const std::vector<KeySpec>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

Schema build_schema() {
  Schema s;
  s["kernel-eval"] = with_seed({integer("d", "1"), list("times", "0.25, 1, 4"), integer("points", "10000"),
                                real("radius", "3"), integer("hermite_nodes", "40")});
  s["kato-eval"] = with_seed({integer("d", "1"), choice("field", "constant", {"constant", "power_law"}),
                              real("value", "1"), real("alpha", "1.2"), list("lambdas", "1"), list("betas", "1"),
                              list("deltas", "0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1"), integer("space_nodes", "32"),
                              integer("time_nodes", "24"), choice("search", "grid", {"origin", "grid"}),
                              real("box", "1"), integer("resolution", "5"), real("tolerance", "1e-4"),
                              real("slope_tolerance", "0.05")});
  s["picard-solve"] = with_seed({real("alpha", "1.2"), integer("mollifier_n", "8"), real("gamma", "1"),
                                 real("T", "0"), integer("nodes", "64"), integer("time_slices", "6"),
                                 real("min_half_width", "1"), real("tol", "1e-9"), integer("max_iter", "40"),
                                 real("lambda", "0.25"), choice("source", "gaussian", {"gaussian", "constant"}),
                                 real("c1", "0"), real("smallness_limit", "0.5"), real("ratio_limit", "0.55"),
                                 real("kato_box", "1")});
  s["parametrix"] = with_seed({real("alpha", "1.2"), integer("mollifier_n", "8"), real("gamma", "1"),
                               real("t", "0.25"), real("x1", "0"), real("x2", "0"), real("y1_lo", "-1.5"),
                               real("y1_hi", "1.5"), real("y2_lo", "0"), real("y2_hi", "0"),
                               integer("y_points", "21"), integer("order", "1"),
                               choice("integrator", "quadrature", {"quadrature", "importance"}),
                               integer("time_nodes", "16"), integer("space_nodes", "20"),
                               integer("samples", "100000"), real("kato_lambda", "0"), real("kappa", "1"),
                               integer("compare_paths", "0"), real("dt", "1e-3"), real("bandwidth", "1.06")});
  s["simulate"] = with_seed(concat(drift_keys("zero"), {real("horizon", "1"), real("dt", "1e-3"),
                                                        integer("paths", "10000"), integer("record_every", "0"),
                                                        boolean("save_ensemble", "false"),
                                                        real("sigmas", "3")}));
  s["particles"] = with_seed({integer("particles", "4"), integer("d", "2"), real("alpha", "1.2"), list("gamma", "1"),
                              real("damping", "0"), real("nu", "1"), real("dt", "1e-4"), real("horizon", "1"),
                              integer("paths", "1000"), choice("mode", "mollified", {"mollified", "tamed", "exact"}),
                              integer("mollifier_n", "8"), real("initial_radius", "1"),
                              integer("record_every", "100")});
  s["verify-bounds"] = with_seed({integer("d", "1"), choice("drift", "zero", {"zero", "damped"}),
                                  real("damping", "0.5"), list("x1", "0"), list("x2", "0"), real("t", "0.25"),
                                  real("dt", "1e-3"), integer("paths", "200000"),
                                  list("calibration_radii", "0.4, 0.6, 0.8"), list("test_radii", "0.5, 0.7"),
                                  integer("angles", "24"), real("sigmas", "3"), real("bandwidth", "1.06")});
  s["krylov"] = with_seed(concat(drift_keys("zero"), {real("t", "0.5"), real("dt", "1e-3"), integer("paths", "20000"),
                                                      integer("record_every", "10"), real("lambda", "0.25"),
                                                      real("box", "1.5"), integer("resolution", "7"),
                                                      real("factor", "1.2")}));
  s["energy"] = with_seed({integer("d", "1"), choice("drift", "zero", {"zero", "damped"}), real("damping", "0.5"),
                           integer("steps", "200"), integer("problems", "50"), integer("test_problems", "50"),
                           integer("numeric_cases", "5"), real("max_offset", "10")});
  s["chain"] = with_seed({integer("d", "1"), choice("drift", "zero", {"zero", "damped"}), real("damping", "0.5"),
                          integer("cases", "100"), integer("calibration", "50"), real("min_offset", "3"),
                          real("max_offset", "12")});
  s["selftest"] = with_seed({});
  return s;
}

// ---- run context -----------------------------------------------------------

class RunContext {
 public:
  RunContext(std::string command, fs::path out, uint64_t seed) : out_(std::move(out)), seed_(seed) {
    manifest.command = std::move(command);
    manifest.seed = seed;
    manifest.tool_version = kToolVersion;
  }

  uint64_t seed() const { return seed_; }

  void csv(const std::string& suffix, const CsvTable& table) { write(name(suffix, ".csv"), table.render()); }
  void json_file(const std::string& suffix, const json& j) { write(name(suffix, ".json"), j.dump(2) + "\n"); }
  // Reserves an artifact path that the caller writes itself.
  std::string reserve(const std::string& suffix, const std::string& ext) {
    const std::string n = name(suffix, ext);
    manifest.artifacts.push_back(n);
    return (out_ / n).string();
  }
  void check(const std::string& check_name, bool passed, const std::string& detail) {
    manifest.checks.push_back({check_name, passed, detail});
  }
  void fingerprint(const FittedConstant& c) { manifest.fingerprints.push_back(c.fingerprint()); }
  void write_manifest() { write_raw(name("manifest", ".json"), manifest.emit()); }

  RunManifest manifest;

 private:
  std::string name(const std::string& suffix, const std::string& ext) const {
    return manifest.command + "-" + suffix + ext;
  }
  void write(const std::string& n, const std::string& content) {
    write_raw(n, content);
    manifest.artifacts.push_back(n);
  }
  void write_raw(const std::string& n, const std::string& content) {
    std::ofstream f(out_ / n, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + (out_ / n).string());
    f << content;
  }

  fs::path out_;
  uint64_t seed_;
};

// ---- helpers ---------------------------------------------------------------

int positive(const Section& s, const std::string& key) {
  const long v = s.integer(key);
  if (v < 1) throw SchemaError("[" + s.name() + "] " + key + ": must be positive");
  return static_cast<int>(v);
}

Eigen::VectorXd block(const Section& s, const std::string& key, int d) {
  const auto v = s.reals(key);
  if (v.size() == 1) return Eigen::VectorXd::Constant(d, v[0]);
  if (static_cast<int>(v.size()) != d)
    throw SchemaError("[" + s.name() + "] " + key + ": needs 1 or d = " + std::to_string(d) + " entries");
  return Eigen::Map<const Eigen::VectorXd>(v.data(), d);
}

PhasePoint start_point(const Section& s, int d) { return PhasePoint(block(s, "x1", d), block(s, "x2", d)); }

DriftSpec make_drift(const Section& s, int d) {
  const std::string& kind = s.text("drift");
  if (kind == "zero") return zero_drift(d);
  if (kind == "damped") return damped_drift(d, s.real("damping"));
  return power_law_drift(d, s.real("alpha"), s.real("gamma"));
}

SingularMode make_mode(const Section& s) {
  const std::string& kind = s.text("mode");
  const int n = positive(s, "mollifier_n");
  if (kind == "mollified") return SingularMode::mollified(n);
  if (kind == "tamed") return SingularMode::tamed(n);
  return SingularMode::exact();
}

std::string fmt_real(double v) { return format_real(v); }

json real_array(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

// Least-squares slope and intercept of log(value) against log(delta).
std::pair<double, double> log_slope(const std::vector<double>& deltas, const std::vector<double>& values) {
  const size_t n = deltas.size();
  if (n < 2) return {NAN, NAN};
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    const double x = std::log(deltas[i]), y = std::log(values[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope, (sy - slope * sx) / n};
}

std::vector<std::string> axis_names(const std::string& prefix, int d) {
  std::vector<std::string> out;
  for (int k = 0; k < d; ++k) out.push_back(fmt::format("{}1_{}", prefix, k));
  for (int k = 0; k < d; ++k) out.push_back(fmt::format("{}2_{}", prefix, k));
  return out;
}

std::vector<std::string> header(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

void append(std::vector<CsvCell>& row, std::span<const double> v) {
  for (double x : v) row.emplace_back(x);
}

// ---- kernel-eval -----------------------------------------------------------

// Gauss-Hermite mass of the kernel from the origin, in coordinates whitened by K_t.
double kernel_mass(int d, double t, int nodes) {
  const KolmogorovKernel K(d, t);
  const Eigen::MatrixXd L = K.covariance().llt().matrixL();
  const double jac = std::pow(2.0, d) * L.diagonal().prod();
  const quad::Rule& gh = quad::gauss_hermite(nodes);
  const int n2 = 2 * d;
  std::vector<int> idx(n2, 0);
  Eigen::VectorXd u(n2);
  const PhasePoint origin(d);
  double total = 0.0;
  while (true) {
    double w = 1.0;
    for (int a = 0; a < n2; ++a) {
      u[a] = gh.nodes[idx[a]];
      w *= gh.weights[idx[a]] * std::exp(u[a] * u[a]);
    }
    total += w * jac * kolmogorov_density(d, t, origin, PhasePoint::stacked(std::sqrt(2.0) * L * u));
    int a = n2 - 1;
    while (a >= 0 && ++idx[a] == nodes) idx[a--] = 0;
    if (a < 0) break;
  }
  return total;
}

void kernel_eval(const Section& s, RunContext& ctx) {
  const int d = positive(s, "d");
  const auto times = s.reals("times");
  const long points = s.integer("points");
  const double radius = s.real("radius");
  const int nodes = positive(s, "hermite_nodes");
  for (double t : times)
    if (!(t > 0.0)) throw SchemaError("[kernel-eval] times: must be positive");

  CsvTable summary({"t", "mass", "mass_error", "inverse_residual", "normalizer", "normalizer_from_determinant"});
  double worst_mass = 0.0, worst_inverse = 0.0, worst_norm = 0.0;
  for (double t : times) {
    const KolmogorovKernel K(d, t);
    const double mass = d <= 2 ? kernel_mass(d, t, nodes) : NAN;
    const Eigen::MatrixXd I = K.covariance() * K.inverse_covariance();
    const double inverse_residual = (I - Eigen::MatrixXd::Identity(2 * d, 2 * d)).cwiseAbs().maxCoeff();
    const double from_det = std::pow(2.0 * M_PI, -d) / std::sqrt(K.determinant());
    worst_mass = std::max(worst_mass, std::abs(mass - 1.0));
    worst_inverse = std::max(worst_inverse, inverse_residual);
    worst_norm = std::max(worst_norm, std::abs(K.normalizer() - from_det) / from_det);
    summary.add({t, mass, mass - 1.0, inverse_residual, K.normalizer(), from_det});
  }
  ctx.csv("summary", summary);
  if (d <= 2) ctx.check("mass", worst_mass <= 1e-6, "max |mass - 1| = " + fmt_real(worst_mass));
  ctx.check("inverse", worst_inverse <= 1e-12, "max |K K^-1 - I| = " + fmt_real(worst_inverse));
  ctx.check("normalizer", worst_norm <= 1e-12, "max relative gap = " + fmt_real(worst_norm));

  // Seeded (t, x, y) with scaled offsets of size up to `radius`.
  const double t_lo = *std::min_element(times.begin(), times.end());
  const double t_hi = *std::max_element(times.begin(), times.end());
  rng::UniformStream uni(ctx.seed(), 0);
  rng::NormalStream nor(ctx.seed(), 1);
  const int n2 = 2 * d;
  CsvTable table(header({{"t"}, axis_names("x", d), axis_names("y", d),
                         {"scaled_sq", "quadratic_form", "density", "lower", "upper"}}));
  long form_bad = 0, density_bad = 0;
  for (long i = 0; i < points; ++i) {
    const double t = t_lo + (t_hi - t_lo) * uni.at(2 * i);
    PhasePoint x(d), w(d);
    for (int a = 0; a < n2; ++a) x[a] = nor.at(static_cast<uint64_t>(i) * 2 * n2 + a);
    for (int a = 0; a < n2; ++a) w[a] = nor.at(static_cast<uint64_t>(i) * 2 * n2 + n2 + a);
    w.vec() *= radius * uni.at(2 * i + 1) / w.vec().norm();
    const KolmogorovKernel K(d, t);
    const PhasePoint y = K.mean(x) - ScaleMatrix(t).apply_inverse(w);
    const PhasePoint z = K.mean(x) - y;
    const double scaled = ScaleMatrix(t).norm_sq(z);
    const double Q = K.quadratic_form(z);
    const double p = kolmogorov_density(d, t, x, y);
    const DensityBounds b = kolmogorov_bounds(d, t, x, y);
    if (!(Q / 4.0 >= kFormRateLow * scaled * (1.0 - 1e-12) && Q / 4.0 <= kFormRateHigh * scaled * (1.0 + 1e-12)))
      ++form_bad;
    if (!(p >= b.lower * (1.0 - 1e-12) && p <= b.upper * (1.0 + 1e-12))) ++density_bad;
    std::vector<CsvCell> row{t};
    append(row, x.span());
    append(row, y.span());
    row.insert(row.end(), {scaled, Q, p, b.lower, b.upper});
    table.add(std::move(row));
  }
  ctx.csv("sandwich", table);
  ctx.check("form_sandwich", form_bad == 0, std::to_string(form_bad) + " of " + std::to_string(points) + " violate");
  ctx.check("density_sandwich", density_bad == 0,
            std::to_string(density_bad) + " of " + std::to_string(points) + " violate");
}

// ---- kato-eval -------------------------------------------------------------

void kato_eval(const Section& s, RunContext& ctx) {
  const int d = positive(s, "d");
  const bool constant = s.text("field") == "constant";
  const double alpha = s.real("alpha");
  const double c = s.real("value");
  const ScalarField f = constant ? ScalarField::constant(d, c)
                                 : power_law_drift(d, alpha).singular_field().magnitude();
  const auto lambdas = s.reals("lambdas");
  const auto betas = s.reals("betas");
  const auto deltas = s.reals("deltas");
  const double tol = s.real("tolerance");
  const double slope_tol = s.real("slope_tolerance");

  KatoQuery q;
  q.f = f;
  q.nodes = {positive(s, "space_nodes"), positive(s, "time_nodes")};
  if (s.text("search") == "origin")
    q.search = FixedPoint{0.0, PhasePoint(d)};
  else
    q.search = GridSearch::box(d, s.real("box"), positive(s, "resolution"));

  CsvTable table(header({{"lambda", "beta", "delta", "value", "quad_error", "argsup_t"}, axis_names("argsup_x", d),
                         {"reference", "bound", "slope", "intercept"}}));
  double worst_rel = 0.0;
  bool bound_ok = true, slope_ok = true;
  std::string slope_detail;
  for (double lambda : lambdas)
    for (double beta : betas) {
      std::vector<KatoEstimate> est;
      std::vector<double> values;
      for (double delta : deltas) {
        q.lambda = lambda;
        q.beta = beta;
        q.delta = delta;
        est.push_back(kato_functional(q));
        values.push_back(est.back().value);
      }
      const auto [slope, intercept] = log_slope(deltas, values);
      for (size_t i = 0; i < deltas.size(); ++i) {
        const double delta = deltas[i];
        double reference, bound = NAN;
        if (constant) {
          reference = kato_constant_closed_form(c, lambda, beta, delta, d);
          worst_rel = std::max(worst_rel, std::abs(values[i] - reference) / reference);
        } else {
          reference = kato_power_law_exact(alpha, lambda, beta, delta, d);
          if (beta == 1.0) {
            bound = kato_power_law_bound(alpha, lambda, delta, d);
            bound_ok = bound_ok && values[i] <= bound;
          }
        }
        std::vector<CsvCell> row{lambda, beta, delta, values[i], est[i].quad_error, est[i].argsup_t};
        append(row, est[i].argsup_x.span());
        row.insert(row.end(), {reference, bound, slope, intercept});
        table.add(std::move(row));
      }
      if (!constant && deltas.size() >= 2) {
        const double expected = (5.0 - beta - 3.0 * alpha) / 2.0;
        slope_ok = slope_ok && std::abs(slope - expected) <= slope_tol;
        slope_detail += fmt::format("lambda {} beta {}: slope {} expected {}; ", fmt_real(lambda), fmt_real(beta),
                                    fmt_real(slope), fmt_real(expected));
      }
    }
  ctx.csv("values", table);
  if (constant) {
    ctx.check("closed_form", worst_rel <= tol, "max relative error = " + fmt_real(worst_rel));
  } else {
    ctx.check("power_law_bound", bound_ok, "value <= closed-form bound at every delta (beta = 1 rows)");
    ctx.check("slope", slope_ok, slope_detail.empty() ? "fewer than two deltas" : slope_detail);
  }
}

// ---- picard-solve ----------------------------------------------------------

std::vector<VectorField> picard_family() {
  std::vector<VectorField> fam;
  for (auto [a, n] : std::vector<std::pair<double, int>>{{1.1, 4}, {1.25, 16}, {1.3, 8}, {1.15, 12}}) {
    PowerLawDrift law{a, {PowerLawTerm{1.0, {}}}};
    fam.push_back(MollifiedPowerLaw(law, n, 1).field());
  }
  fam.push_back(VectorField::constant(Eigen::VectorXd::Ones(1)));
  return fam;
}

void picard(const Section& s, RunContext& ctx) {
  const GaussianTransition trans(FlowMap(zero_drift(1)), DiffusionSpec::identity(1));
  const double gamma = s.real("gamma");
  VectorField b1 = VectorField::zero(1);
  if (gamma != 0.0) {
    PowerLawDrift law{s.real("alpha"), {PowerLawTerm{gamma, {}}}};
    b1 = MollifiedPowerLaw(law, positive(s, "mollifier_n"), 1).field();
  }
  PicardOptions opt;
  opt.lambda = s.real("lambda");
  opt.tol = s.real("tol");
  opt.max_iter = positive(s, "max_iter");
  opt.smallness_limit = s.real("smallness_limit");
  opt.kato_box = s.real("kato_box");
  if (s.real("c1") > 0.0)
    opt.C1 = {"C1", s.real("c1"), {ctx.seed(), "config", 1}};
  else
    opt.C1 = fit_picard_constant(trans, picard_family(), {0.01, 0.05, 0.2}, opt.lambda, opt.kato_box,
                                 {ctx.seed(), "picard-calibration", 0});
  ctx.fingerprint(opt.C1);

  double T = s.real("T");
  if (T <= 0.0) T = required_horizon(b1, opt.C1.value, opt.lambda, opt.smallness_limit, opt.kato_box);
  const ScalarField source = s.text("source") == "gaussian"
                                 ? ScalarField::gaussian(PhasePoint(1), Eigen::Vector2d(0.5, 0.5))
                                 : ScalarField::constant(1, 1.0);
  const GridTemplate grid =
      GridTemplate::automatic(trans, T, positive(s, "nodes"), positive(s, "time_slices"), s.real("min_half_width"));
  const PicardResult res = picard_solve(trans, b1, source, T, grid, opt);

  CsvTable sol({"t", "x1", "x2", "u", "grad_x1"});
  const auto& times = res.u.time_nodes();
  std::vector<double> node(2);
  for (size_t ti = 0; ti < times.size(); ++ti)
    for (size_t k = 0; k < res.u.slice_size(); ++k) {
      res.u.space().node(k, node);
      sol.add({times[ti], node[0], node[1], res.u.value(ti, k), res.u.grad(ti, k, 0)});
    }
  ctx.csv("solution", sol);

  std::vector<double> ratios;
  for (size_t k = 1; k < res.history.size(); ++k)
    ratios.push_back(res.history[k - 1] > 0.0 ? res.history[k] / res.history[k - 1] : 0.0);
  const double limit = s.real("ratio_limit");
  bool contraction = true;
  for (double r : ratios) contraction = contraction && r <= limit;
  json report;
  report["T"] = T;
  report["C1"] = opt.C1.value;
  report["C1_fingerprint"] = opt.C1.fingerprint();
  report["kato_b1"] = res.kato_b1;
  report["smallness"] = res.smallness;
  report["iterations"] = res.iterations;
  report["history"] = real_array(res.history);
  report["ratios"] = real_array(ratios);
  ctx.json_file("report", report);

  ctx.check("smallness", res.smallness <= opt.smallness_limit, "C1 K = " + fmt_real(res.smallness));
  ctx.check("contraction", contraction, "max ratio = " +
                                            fmt_real(ratios.empty() ? 0.0 : *std::max_element(ratios.begin(), ratios.end())));
  if (gamma == 0.0)
    ctx.check("one_step", res.history.size() >= 2 && res.history[1] == 0.0, "second update is exactly zero");
}

// ---- parametrix ------------------------------------------------------------

void parametrix(const Section& s, RunContext& ctx) {
  const double alpha = s.real("alpha"), gamma = s.real("gamma"), t = s.real("t");
  const int n = positive(s, "mollifier_n");
  const PowerLawDrift law{alpha, {PowerLawTerm{gamma, {}}}};
  ParametrixConfig cfg{GaussianTransition(FlowMap(zero_drift(1)), DiffusionSpec::identity(1)),
                       MollifiedPowerLaw(law, n, 1).field(), positive(s, "order"), QuadratureMode{},
                       std::nullopt, 1.0};
  if (s.text("integrator") == "quadrature")
    cfg.integrator = QuadratureMode{positive(s, "time_nodes"), positive(s, "space_nodes")};
  else
    cfg.integrator = ImportanceMode{s.integer("samples"), ctx.seed()};
  if (s.real("kato_lambda") > 0.0) cfg.kato_lambda = s.real("kato_lambda");
  cfg.kappa = s.real("kappa");
  cfg.validate();

  const PhasePoint x = PhasePoint::of(s.real("x1"), s.real("x2"));
  const int m = positive(s, "y_points");
  const double y1_lo = s.real("y1_lo"), y1_hi = s.real("y1_hi"), y2_lo = s.real("y2_lo"), y2_hi = s.real("y2_hi");
  std::vector<PhasePoint> ys;
  for (int i = 0; i < m; ++i) {
    const double u = m > 1 ? static_cast<double>(i) / (m - 1) : 0.0;
    ys.push_back(PhasePoint::of(y1_lo + u * (y1_hi - y1_lo), y2_lo + u * (y2_hi - y2_lo)));
  }
  const double spacing = m > 1 ? std::hypot(y1_hi - y1_lo, y2_hi - y2_lo) / (m - 1) : 1.0;

  std::vector<std::string> cols{"y1", "y2", "p0"};
  for (int j = 1; j <= cfg.order; ++j) cols.push_back(fmt::format("term_{}", j));
  for (int j = 1; j <= cfg.order; ++j) cols.push_back(fmt::format("term_error_{}", j));
  cols.insert(cols.end(), {"value", "std_error", "divergence"});
  CsvTable terms(cols);
  json points = json::array();
  std::vector<KernelEstimate> est;
  bool divergence = false, finite = true;
  std::vector<double> ladder;
  for (const auto& y : ys) {
    est.push_back(parametrix_series(cfg, 0.0, x, t, y));
    const KernelEstimate& e = est.back();
    std::vector<CsvCell> row{y[0], y[1], e.terms[0]};
    for (int j = 1; j <= cfg.order; ++j) row.emplace_back(e.terms[j]);
    for (int j = 1; j <= cfg.order; ++j) row.emplace_back(e.term_errors[j]);
    row.insert(row.end(), {e.value, e.std_error, e.divergence ? 1 : 0});
    terms.add(std::move(row));
    divergence = divergence || e.divergence;
    finite = finite && std::isfinite(e.value) && std::isfinite(e.std_error);
    ladder = e.lambda_ladder;
    points.push_back({{"y", {y[0], y[1]}}, {"value", e.value}, {"std_error", e.std_error}});
  }
  ctx.csv("terms", terms);
  ctx.check("finite", finite, "all series values finite");

  json summary;
  summary["points"] = points;
  summary["value"] = est[m / 2].value;
  summary["std_error"] = est[m / 2].std_error;
  summary["lambda_estimate"] = est[m / 2].lambda_estimate;
  summary["lambda_ladder"] = real_array(ladder);
  summary["divergence_flag"] = divergence;

  const long paths = s.integer("compare_paths");
  if (paths > 0) {
    SimulationPlan plan;
    plan.drift = power_law_drift(1, alpha, gamma);
    plan.diffusion = DiffusionSpec::identity(1);
    plan.x0 = x;
    plan.horizon = t;
    plan.dt = s.real("dt");
    plan.paths = paths;
    plan.seed = ctx.seed();
    plan.singular_mode = SingularMode::mollified(n);
    const PathEnsemble ens = simulate(plan);
    const KdeEstimator kde(ens, ens.time_index(t), s.real("bandwidth"));
    CsvTable cmp({"y1", "y2", "kde", "kde_std_error", "p0", "series"});
    double d0 = 0.0, d1 = 0.0, se = 0.0;
    for (int i = 0; i < m; ++i) {
      const KdeValue v = kde(ys[i]);
      d0 += std::abs(v.estimate - est[i].terms[0]) * spacing;
      d1 += std::abs(v.estimate - est[i].value) * spacing;
      se += v.std_error * spacing;
      cmp.add({ys[i][0], ys[i][1], v.estimate, v.std_error, est[i].terms[0], est[i].value});
    }
    ctx.csv("compare", cmp);
    summary["l1_base"] = d0;
    summary["l1_series"] = d1;
    summary["kde_std_error"] = se;
    ctx.check("improvement", d0 - d1 >= se,
              "L1 to p0 " + fmt_real(d0) + ", to series " + fmt_real(d1) + ", KDE error " + fmt_real(se));
  }
  ctx.json_file("summary", summary);
}

// ---- simulate --------------------------------------------------------------

void simulate_cmd(const Section& s, RunContext& ctx) {
  const int d = positive(s, "d");
  SimulationPlan plan;
  plan.drift = make_drift(s, d);
  plan.diffusion = DiffusionSpec::identity(d);
  plan.x0 = start_point(s, d);
  plan.horizon = s.real("horizon");
  plan.dt = s.real("dt");
  plan.paths = s.integer("paths");
  plan.seed = ctx.seed();
  plan.singular_mode = make_mode(s);
  plan.record_every = static_cast<int>(s.integer("record_every"));
  const PathEnsemble ens = simulate(plan);

  const int n2 = 2 * d;
  std::vector<std::string> cols{"t"};
  for (int a = 0; a < n2; ++a) cols.push_back(fmt::format("mean_{}", a));
  for (int a = 0; a < n2; ++a)
    for (int b = a; b < n2; ++b) cols.push_back(fmt::format("cov_{}_{}", a, b));
  for (int a = 0; a < n2; ++a)
    for (int b = a; b < n2; ++b) cols.push_back(fmt::format("cov_se_{}_{}", a, b));
  CsvTable table(cols);
  Moments2 last;
  for (size_t ti = 0; ti < ens.times().size(); ++ti) {
    const Moments2 m = sample_moments(ens, ti);
    std::vector<CsvCell> row{ens.times()[ti]};
    for (int a = 0; a < n2; ++a) row.emplace_back(m.mean[a]);
    for (int a = 0; a < n2; ++a)
      for (int b = a; b < n2; ++b) row.emplace_back(m.cov(a, b));
    for (int a = 0; a < n2; ++a)
      for (int b = a; b < n2; ++b) row.emplace_back(m.cov_std_error(a, b));
    table.add(std::move(row));
    last = m;
  }
  ctx.csv("moments", table);
  ctx.check("flagged", ens.flagged() * 100 <= plan.paths,
            std::to_string(ens.flagged()) + " non-finite paths of " + std::to_string(plan.paths));

  if (s.text("drift") == "zero") {
    const Eigen::MatrixXd K = KolmogorovKernel(d, plan.horizon).covariance();
    const double sigmas = s.real("sigmas");
    double worst = 0.0;
    for (int a = 0; a < n2; ++a)
      for (int b = 0; b < n2; ++b) {
        const double se = last.cov_std_error(a, b);
        const double z = se > 0.0 ? std::abs(last.cov(a, b) - K(a, b)) / se : (last.cov(a, b) == K(a, b) ? 0 : INFINITY);
        worst = std::max(worst, z);
      }
    ctx.check("free_covariance", worst <= sigmas, "max |cov - K_t| / se = " + fmt_real(worst));
  }
  if (s.flag("save_ensemble")) {
    write_ensemble(ctx.reserve("ensemble", ".bin"), ens);
    write_plan_sidecar(ctx.reserve("plan", ".json"), plan);
  }
}

// ---- particles -------------------------------------------------------------

void particles_cmd(const Section& s, RunContext& ctx) {
  ParticleSystemPlan plan;
  plan.particles = positive(s, "particles");
  plan.d = positive(s, "d");
  plan.alpha = s.real("alpha");
  plan.gamma = s.reals("gamma");
  if (plan.gamma.size() == 1) plan.gamma.assign(plan.particles, plan.gamma[0]);
  if (static_cast<int>(plan.gamma.size()) != plan.particles)
    throw SchemaError("[particles] gamma: needs 1 or one entry per particle");
  plan.damping = s.real("damping");
  plan.nu = s.real("nu");
  plan.dt = s.real("dt");
  plan.horizon = s.real("horizon");
  plan.paths = s.integer("paths");
  plan.seed = ctx.seed();
  plan.singular_mode = make_mode(s);
  plan.initial_radius = s.real("initial_radius");
  plan.record_every = positive(s, "record_every");
  const ParticleEnsemble ens = simulate_particles(plan);

  CsvTable energy({"t", "kinetic_energy", "velocity_variance"});
  for (size_t i = 0; i < ens.times.size(); ++i)
    energy.add({ens.times[i], ens.kinetic_energy[i], ens.velocity_variance[i]});
  ctx.csv("energy", energy);
  CsvTable paths({"path", "min_distance"});
  double closest = INFINITY;
  for (size_t p = 0; p < ens.min_distance.size(); ++p) {
    paths.add({static_cast<long>(p), ens.min_distance[p]});
    closest = std::min(closest, ens.min_distance[p]);
  }
  ctx.csv("paths", paths);
  if (plan.singular_mode.kind == SingularMode::Kind::mollified)
    ctx.check("no_flagged", ens.flagged == 0, std::to_string(ens.flagged) + " flagged paths");
  ctx.check("separation", closest > 0.0, "smallest pair distance " + fmt_real(closest));
}

// ---- verify-bounds ---------------------------------------------------------

void verify_bounds(const Section& s, RunContext& ctx) {
  const int d = positive(s, "d");
  SimulationPlan plan;
  plan.drift = s.text("drift") == "zero" ? zero_drift(d) : damped_drift(d, s.real("damping"));
  plan.diffusion = DiffusionSpec::identity(d);
  plan.x0 = start_point(s, d);
  plan.horizon = s.real("t");
  plan.dt = s.real("dt");
  plan.paths = s.integer("paths");
  plan.seed = ctx.seed();
  const PathEnsemble ens = simulate(plan);

  TwoSidedOptions opt;
  opt.calibration_radii = s.reals("calibration_radii");
  opt.test_radii = s.reals("test_radii");
  opt.angles = positive(s, "angles");
  opt.sigmas = s.real("sigmas");
  opt.bandwidth_c = s.real("bandwidth");
  opt.calibration_seed = ctx.seed();
  const FlowMap fm(plan.drift);
  const TwoSidedReport rep = verify_two_sided(ens, plan.horizon, fm, 0.0, plan.x0, opt);

  CsvTable table(header({{"set"}, axis_names("y", d),
                         {"scaled_sq", "estimate", "std_error", "lower", "upper", "ok"}}));
  auto add = [&](const char* set, const SandwichPoint& sp) {
    std::vector<CsvCell> row{set};
    append(row, sp.y.span());
    row.insert(row.end(), {sp.scaled_sq, sp.estimate, sp.std_error, sp.lower, sp.upper, sp.ok ? 1 : 0});
    table.add(std::move(row));
  };
  for (const auto& sp : rep.calibration) add("calibration", sp);
  for (const auto& sp : rep.test) add("test", sp);
  ctx.csv("points", table);
  CsvTable constants({"name", "value", "fingerprint"});
  for (const FittedConstant* c : {&rep.C0, &rep.lambda0, &rep.C1, &rep.lambda1}) {
    constants.add({c->name, c->value, c->fingerprint()});
    ctx.fingerprint(*c);
  }
  ctx.csv("constants", constants);
  ctx.check("sandwich", rep.all_ok, "test grid inside the fitted bounds within " + fmt_real(opt.sigmas) + " sigma");

  json j;
  j["lambda0"] = rep.lambda0.value;
  j["lambda1"] = rep.lambda1.value;
  j["C0"] = rep.C0.value;
  j["C1"] = rep.C1.value;
  j["r_squared"] = rep.r_squared;
  j["kde_mass"] = rep.kde_mass;
  if (s.text("drift") == "zero") {
    // Exact density rates are 2 c-+ for the normalized kernel. The KDE widens the
    // Gaussian by (1 + h^2) in whitened coordinates, which lowers every fitted rate.
    const double h = opt.bandwidth_c * std::pow(static_cast<double>(ens.paths()), -1.0 / (2 * d + 4));
    const double lo = 2.0 * kFormRateLow / (1.0 + h * h), hi = 2.0 * kFormRateHigh;
    const double logc = std::log(rep.C0.value * std::pow(plan.horizon, -2.0 * d));
    long outside = 0;
    for (const auto& sp : rep.calibration) {
      // The centre error is at most the point error in relative terms.
      const double rate = (logc - std::log(sp.estimate)) / sp.scaled_sq;
      const double sigma = std::sqrt(2.0) * sp.std_error / sp.estimate / sp.scaled_sq;
      if (rate < lo - opt.sigmas * sigma || rate > hi + opt.sigmas * sigma) ++outside;
    }
    j["rate_low"] = 2.0 * kFormRateLow;
    j["rate_high"] = 2.0 * kFormRateHigh;
    j["bandwidth"] = h;
    ctx.check("exact_rates_bracket", outside == 0,
              "fitted [" + fmt_real(rep.lambda1.value) + ", " + fmt_real(rep.lambda0.value) + "], exact [" +
                  fmt_real(2.0 * kFormRateLow) + ", " + fmt_real(hi) + "], " + std::to_string(outside) +
                  " calibration rates outside by more than " + fmt_real(opt.sigmas) + " sigma");
  }
  ctx.json_file("report", j);
}

// ---- krylov ----------------------------------------------------------------

void krylov(const Section& s, RunContext& ctx) {
  const int d = positive(s, "d");
  if (d != 1) throw SchemaError("[krylov] d: the test families are defined for d = 1");
  SimulationPlan plan;
  plan.drift = make_drift(s, d);
  plan.diffusion = DiffusionSpec::identity(d);
  plan.x0 = start_point(s, d);
  const double t = s.real("t");
  plan.horizon = t;
  plan.dt = s.real("dt");
  plan.paths = s.integer("paths");
  plan.singular_mode = make_mode(s);
  plan.record_every = positive(s, "record_every");
  KatoQuery q;
  q.lambda = s.real("lambda");
  q.search = GridSearch::box(d, s.real("box"), positive(s, "resolution"));
  CsvTable table({"family", "member", "mc_value", "mc_std_error", "kato_value", "ratio"});
  std::vector<double> cal_ratios, test_ratios;
  const uint64_t test_seed = ctx.seed() + 1;
  for (bool calibration : {true, false}) {
    // The test family runs on its own ensemble.
    plan.seed = calibration ? ctx.seed() : test_seed;
    const PathEnsemble ens = simulate(plan);
    const auto fam = krylov_family(calibration);
    for (size_t i = 0; i < fam.size(); ++i) {
      const KrylovResult r = krylov_estimate(ens, fam[i], t, q);
      (calibration ? cal_ratios : test_ratios).push_back(r.ratio);
      table.add({calibration ? "calibration" : "test", static_cast<long>(i), r.mc_value, r.mc_std_error,
                 r.kato_value, r.ratio});
    }
  }
  ctx.csv("ratios", table);
  FittedConstants constants;
  constants.add(fit_max_ratio("C3", cal_ratios, {ctx.seed(), "krylov-calibration", 0}));
  const FittedConstant& C3 = constants.use("C3", "krylov-test", test_seed);
  ctx.fingerprint(C3);
  const double worst = *std::max_element(test_ratios.begin(), test_ratios.end());
  const double factor = s.real("factor");
  ctx.check("ratio_bounded", worst <= factor * C3.value,
            "max test ratio " + fmt_real(worst) + ", C3 " + fmt_real(C3.value));
}

// ---- energy ----------------------------------------------------------------

FlowMap control_flow(const Section& s, int d) {
  return FlowMap(s.text("drift") == "zero" ? zero_drift(d) : damped_drift(d, s.real("damping")));
}

void energy_cmd(const Section& s, RunContext& ctx) {
  const int d = positive(s, "d");
  const FlowMap fm = control_flow(s, d);
  const int steps = positive(s, "steps");
  const bool zero = s.text("drift") == "zero";

  if (zero) {
    const Eigen::MatrixXd G = gramian(fm, 0.0, 1.0);
    Eigen::MatrixXd expected(2 * d, 2 * d);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    expected << I, 0.5 * I, 0.5 * I, I / 3.0;
    const double gap = (G - expected).cwiseAbs().maxCoeff();
    ctx.check("gramian", gap <= 1e-10, "max |G(0,1) - closed form| = " + fmt_real(gap));
    ControlProblem unit{fm, 0.0, 1.0, PhasePoint(d), PhasePoint(d)};
    unit.y[d] = 1.0;
    const double I2 = std::pow(energy(unit), 2);
    ctx.check("unit_energy", std::abs(I2 - 12.0) <= 1e-8, "I^2 = " + fmt_real(I2));
  }

  const auto cal = sample_problems(fm, static_cast<int>(s.integer("problems")), ctx.seed(), s.real("max_offset"));
  FittedConstants constants;
  constants.add(fit_energy_c1(cal, {ctx.seed(), "energy-calibration", 0}));
  const uint64_t test_seed = ctx.seed() + 1;
  const double c1 = constants.use("c1", "energy-test", test_seed).value;
  ctx.fingerprint(constants.get("c1"));
  const auto test = sample_problems(fm, static_cast<int>(s.integer("test_problems")), test_seed, s.real("max_offset"));

  CsvTable table(header({{"case", "t"}, axis_names("x", d), axis_names("y", d),
                         {"offset", "energy", "energy_numeric", "lower_slack", "upper_slack"}}));
  const long numeric_cases = s.integer("numeric_cases");
  bool sandwich = true;
  double worst_numeric = 0.0;
  for (size_t i = 0; i < test.size(); ++i) {
    const auto& p = test[i];
    const double w = p.scaled_offset();
    const double I = energy(p);
    double num = NAN;
    if (static_cast<long>(i) < numeric_cases) {
      num = energy_numeric(p, steps).energy;
      worst_numeric = std::max(worst_numeric, std::abs(num - I) / std::max(1.0, I));
    }
    sandwich = sandwich && energy_sandwich_holds(p, c1);
    std::vector<CsvCell> row{static_cast<long>(i), p.t};
    append(row, p.x.span());
    append(row, p.y.span());
    row.insert(row.end(), {w, I, num, I - (w - 1.0) / c1, c1 * (w + 1.0) - I});
    table.add(std::move(row));
  }
  ctx.csv("cases", table);
  ctx.check("sandwich", sandwich, "fitted c1 = " + fmt_real(c1) + " on a disjoint test seed");
  if (numeric_cases > 0)
    ctx.check("numeric", worst_numeric <= 1e-3, "max relative gap = " + fmt_real(worst_numeric));
}

// ---- chain -----------------------------------------------------------------

void chain(const Section& s, RunContext& ctx) {
  const int d = positive(s, "d");
  const FlowMap fm = control_flow(s, d);
  const double max_offset = s.real("max_offset");
  const auto cal = sample_problems(fm, static_cast<int>(s.integer("calibration")), ctx.seed(), max_offset);
  FittedConstants constants;
  constants.add(fit_energy_c1(cal, {ctx.seed(), "chain-calibration", 0}));
  constants.add(fit_control_c2(cal, {ctx.seed(), "chain-calibration", 0}));
  const uint64_t test_seed = ctx.seed() + 1;
  const double c1 = constants.use("c1", "chain-test", test_seed).value;
  const double c2 = constants.use("c2", "chain-test", test_seed).value;
  for (const auto& name : {"c1", "c2"}) ctx.fingerprint(constants.get(name));

  const auto cases = sample_problems(fm, static_cast<int>(s.integer("cases")), test_seed, max_offset, 0.1, 1.0,
                                     s.real("min_offset"));
  CsvTable table({"case", "t", "offset", "energy", "steps", "max_step", "bound", "min_slack"});
  long failed = 0;
  std::string first_failure;
  for (size_t i = 0; i < cases.size(); ++i) {
    const auto& p = cases[i];
    try {
      const ChainingPlan plan = build_chain(p, c1, c2);
      const double max_step = *std::max_element(plan.step_values.begin(), plan.step_values.end());
      const double slack = *std::min_element(plan.slack.begin(), plan.slack.end());
      table.add({static_cast<long>(i), p.t, plan.scaled_offset, energy(p), plan.M, max_step, plan.bound, slack});
    } catch (const ConstructionError& e) {
      ++failed;
      if (first_failure.empty()) first_failure = fmt::format("case {} step {}", i, e.step());
      table.add({static_cast<long>(i), p.t, p.scaled_offset(), energy(p), -1, NAN, 2 * c1 * c2 + 1, NAN});
    }
  }
  ctx.csv("cases", table);
  ctx.check("per_step_bound", failed == 0,
            failed ? std::to_string(failed) + " cases fail, first " + first_failure
                   : std::to_string(cases.size()) + " far-field cases within 2 c1 c2 + 1");
}

// ---- selftest --------------------------------------------------------------

void selftest(const Section&, RunContext& ctx) {
  CsvTable table({"name", "value", "reference", "tolerance", "passed"});
  auto add = [&](const std::string& name, double value, double reference, double tol) {
    const bool ok = std::abs(value - reference) <= tol;
    table.add({name, value, reference, tol, ok ? 1 : 0});
    ctx.check(name, ok, fmt_real(value) + " vs " + fmt_real(reference));
  };
  const auto ctr = rng::philox4x32({0, 0, 0, 0}, {0, 0});
  add("philox_word0", ctr[0], 0x6627e8d5u, 0);
  add("philox_word3", ctr[3], 0x9b00dbd8u, 0);
  add("kernel_mass", kernel_mass(1, 1.0, 40), 1.0, 1e-6);
  const FlowMap free(zero_drift(1));
  add("gramian_01", gramian(free, 0.0, 1.0)(0, 1), 0.5, 1e-12);
  ControlProblem unit{free, 0.0, 1.0, PhasePoint::of(0, 0), PhasePoint::of(0, 1)};
  add("unit_energy_sq", std::pow(energy(unit), 2), 12.0, 1e-8);
  KatoQuery q;
  q.f = ScalarField::constant(1, 1.0);
  q.search = FixedPoint{0.0, PhasePoint(1)};
  add("kato_constant", kato_functional(q).value, kato_constant_closed_form(1.0, 1.0, 1.0, 0.25, 1), 1e-6);
  add("mollifier_mass", Mollifier(4, 1).mass(), 1.0, 1e-6);
  ctx.csv("checks", table);
}

using Handler = std::function<void(const Section&, RunContext&)>;

const std::map<std::string, Handler>& handlers() {
  static const std::map<std::string, Handler> h{
      {"kernel-eval", kernel_eval}, {"kato-eval", kato_eval},     {"picard-solve", picard},
      {"parametrix", parametrix},   {"simulate", simulate_cmd},   {"particles", particles_cmd},
      {"verify-bounds", verify_bounds}, {"krylov", krylov},      {"energy", energy_cmd},
      {"chain", chain},             {"selftest", selftest}};
  return h;
}

json error_json(const std::string& command, const std::string& type, const std::string& message) {
  json j;
  j["command"] = command;
  j["error"] = type;
  j["message"] = message;
  return j;
}

}  // namespace

const Schema& schema() {
  static const Schema s = build_schema();
  return s;
}

std::vector<std::string> command_names() {
  std::vector<std::string> out;
  for (const auto& [name, h] : handlers()) out.push_back(name);
  return out;
}

std::vector<ScalarField> krylov_family(bool calibration) {
  // centre (x1, x2), widths (x1, x2)
  static const double cal[5][4] = {
      {0, 0, 0.3, 0.3}, {0, 0, 1, 1}, {0.5, 0, 0.5, 0.5}, {0, 0.3, 0.5, 0.2}, {0, 0, 2, 0.5}};
  static const double test[5][4] = {
      {0, 0, 0.5, 0.5}, {0.3, 0.1, 0.4, 0.4}, {0, 0, 1.5, 1}, {-0.4, 0, 0.7, 0.3}, {0, -0.2, 0.8, 0.8}};
  std::vector<ScalarField> out;
  for (const auto& p : calibration ? cal : test)
    out.push_back(ScalarField::gaussian(PhasePoint::of(p[0], p[1]), Eigen::Vector2d(p[2], p[3])));
  return out;
}

int run(const RunOptions& o, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  auto handler = handlers().find(o.command);
  if (handler == handlers().end()) {
    err << error_json(o.command, "SchemaError", "unknown subcommand").dump() << "\n";
    return 2;
  }
  Section sec;
  uint64_t seed = 0;
  try {
    Config cfg = o.config_text ? Config::parse(*o.config_text, schema())
                 : o.config_path ? Config::load(*o.config_path, schema())
                                 : Config::parse("", schema());
    sec = cfg.section(o.command);
    const long s = sec.integer("seed");
    if (s < 0) throw SchemaError("[" + o.command + "] seed: must be nonnegative");
    seed = o.seed ? *o.seed : static_cast<uint64_t>(s);
    sec.set("seed", std::to_string(seed));
  } catch (const SchemaError& e) {
    err << error_json(o.command, "SchemaError", e.what()).dump() << "\n";
    return 2;
  }

  fs::path out = ".";
  if (o.out_dir)
    out = *o.out_dir;
  else if (const char* env = std::getenv("KINETIC_OUT_DIR"))
    out = env;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (o.threads > 0) omp_set_num_threads(o.threads);

  RunContext ctx(o.command, out, seed);
  ctx.manifest.config_hash = fmt::format("{:016x}", fnv1a(sec.canonical()));
  int status = 0;
  try {
    handler->second(sec, ctx);
  } catch (const SchemaError& e) {
    err << error_json(o.command, "SchemaError", e.what()).dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    json j = error_json(o.command, "ComputationError", e.what());
    if (auto* x = dynamic_cast<const SmallnessError*>(&e)) {
      j["error"] = "SmallnessError";
      j["required_horizon"] = x->required_horizon();
    } else if (auto* x = dynamic_cast<const ConvergenceError*>(&e)) {
      j["error"] = "ConvergenceError";
      j["history"] = real_array(x->history());
    } else if (auto* x = dynamic_cast<const ConstructionError*>(&e)) {
      j["error"] = "ConstructionError";
      j["step"] = x->step();
    } else if (dynamic_cast<const RunError*>(&e)) {
      j["error"] = "RunError";
    } else if (dynamic_cast<const DomainError*>(&e) || dynamic_cast<const ArgumentError*>(&e) ||
               dynamic_cast<const PreconditionError*>(&e)) {
      j["error"] = "InvalidInput";
    }
    err << j.dump() << "\n";
    try {
      ctx.json_file("error", j);
    } catch (const std::exception&) {
    }
    ctx.check("completed", false, e.what());
    status = 1;
  }
  ctx.manifest.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  try {
    ctx.write_manifest();
  } catch (const std::exception& e) {
    err << error_json(o.command, "IOError", e.what()).dump() << "\n";
    return 1;
  }
  if (status == 0 && !ctx.manifest.all_passed()) status = 1;
  return status;
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Kinetic SDE kernels, Kato functionals and Monte Carlo experiments"};
  RunOptions opt;
  std::string config;
  uint64_t seed = 0;
  std::string out;
  app.add_option("--config", config, "INI configuration file");
  auto* seed_opt = app.add_option("--seed", seed, "Seed override");
  app.add_option("--out", out, "Output directory (default: $KINETIC_OUT_DIR or .)");
  app.add_option("--threads", opt.threads, "OpenMP threads");
  app.require_subcommand(1);
  for (const auto& name : command_names()) app.add_subcommand(name)->fallthrough();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  opt.command = app.get_subcommands().front()->get_name();
  if (!config.empty()) opt.config_path = config;
  if (*seed_opt) opt.seed = seed;
  if (!out.empty()) opt.out_dir = out;
  return run(opt, std::cerr);
}

}  // namespace kinetic::cli
