#include "kinetic/flow.hpp"

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "kinetic/errors.hpp"
#include "kinetic/quadrature.hpp"
#include "kinetic/rng.hpp"

namespace kinetic {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;


}  // namespace

// ---- DriftSpec ----------------------------------------------------------

void DriftSpec::validate() const {
  if (d < 1) throw ArgumentError("DriftSpec: d must be >= 1");
  if (!(kappa0 > 0.0) || !(kappa1 > 0.0)) throw DomainError("DriftSpec: kappa0, kappa1 must be positive");
  if (const auto* lin = std::get_if<LinearDrift>(&regular)) {
    if (lin->F1.rows() != d || lin->F1.cols() != d || lin->F2.rows() != d || lin->F2.cols() != d)
      throw ArgumentError("DriftSpec: F1, F2 must be d x d");
    if (lin->f0.size() != 0 && lin->f0.size() != d) throw ArgumentError("DriftSpec: f0 must have length d");
  }
  if (const auto* cal = std::get_if<CallableDrift>(&regular)) {
    if (!cal->fn) throw ArgumentError("DriftSpec: empty callable drift");
  }
  if (const auto* pl = std::get_if<PowerLawDrift>(&singular)) {
    if (!(pl->alpha > 1.0 && pl->alpha < 4.0 / 3.0))
      throw DomainError("DriftSpec: power-law alpha must lie strictly inside (1, 4/3)");
    for (const auto& term : pl->terms)
      if (term.center.size() != 0 && term.center.size() != d)
        throw ArgumentError("DriftSpec: power-law center must have length d");
  }
  if (const auto* g = std::get_if<GridSampledDrift>(&singular)) {
    if (!g->values || g->values->grid().rank() != 2 * d || g->values->components() != d)
      throw ArgumentError("DriftSpec: grid-sampled drift must live on a 2d-rank grid with d components");
  }
  if (const auto* c = std::get_if<CallableSingular>(&singular)) {
    if (!c->field.fn || c->field.d != d) throw ArgumentError("DriftSpec: callable singular field mismatch");
  }
}

void DriftSpec::regular_value(double t, std::span<const double> x, std::span<double> out) const {
  std::visit(overloaded{
                 [&](const ZeroDrift&) {
                   for (int i = 0; i < d; ++i) out[i] = 0.0;
                 },
                 [&](const LinearDrift& lin) {
                   for (int i = 0; i < d; ++i) {
                     double acc = lin.f0.size() ? lin.f0[i] : 0.0;
                     for (int j = 0; j < d; ++j) acc += lin.F1(i, j) * x[j] + lin.F2(i, j) * x[d + j];
                     out[i] = acc;
                   }
                   if (lin.f0_time) {
                     const Eigen::VectorXd extra = lin.f0_time(t);
                     for (int i = 0; i < d; ++i) out[i] += extra[i];
                   }
                 },
                 [&](const CallableDrift& c) { c.fn(t, x, out); },
             },
             regular);
}

void DriftSpec::singular_value(double t, std::span<const double> x, std::span<double> out) const {
  std::visit(overloaded{
                 [&](const NoSingular&) {
                   for (int i = 0; i < d; ++i) out[i] = 0.0;
                 },
                 [&](const PowerLawDrift& pl) {
                   for (int i = 0; i < d; ++i) out[i] = 0.0;
                   double diff[16];
                   for (const auto& term : pl.terms) {
                     double r2 = 0.0;
                     for (int i = 0; i < d; ++i) {
                       diff[i] = x[d + i] - (term.center.size() ? term.center[i] : 0.0);
                       r2 += diff[i] * diff[i];
                     }
                     const double r = std::sqrt(r2);
                     if (r == 0.0) continue;
                     // unit vector times r^{1-alpha}: no overflow for tiny r
                     const double scale = term.gamma * std::pow(r, 1.0 - pl.alpha);
                     for (int i = 0; i < d; ++i) out[i] += scale * (diff[i] / r);
                   }
                 },
                 [&](const GridSampledDrift& g) { g.values->interpolate(x, out); },
                 [&](const CallableSingular& c) { c.field.fn(t, x, out); },
             },
             singular);
}

VectorField DriftSpec::regular_field() const {
  VectorField f;
  auto self = *this;
  f.fn = [self](double t, std::span<const double> x, std::span<double> out) { self.regular_value(t, x, out); };
  f.d = d;
  if (std::holds_alternative<ZeroDrift>(regular)) {
    f.time_independent = true;
    f.active_axes = std::vector<int>{};
  } else if (const auto* lin = std::get_if<LinearDrift>(&regular)) {
    f.time_independent = !lin->f0_time;
  }
  return f;
}

VectorField DriftSpec::singular_field() const {
  VectorField f;
  auto self = *this;
  f.fn = [self](double t, std::span<const double> x, std::span<double> out) { self.singular_value(t, x, out); };
  f.d = d;
  std::visit(overloaded{
                 [&](const NoSingular&) {
                   f.time_independent = true;
                   f.active_axes = std::vector<int>{};
                 },
                 [&](const PowerLawDrift&) {
                   f.time_independent = true;
                   std::vector<int> axes;
                   for (int i = 0; i < d; ++i) axes.push_back(d + i);
                   f.active_axes = axes;
                 },
                 [&](const GridSampledDrift&) { f.time_independent = true; },
                 [&](const CallableSingular& c) {
                   f.time_independent = c.field.time_independent;
                   f.active_axes = c.field.active_axes;
                 },
             },
             singular);
  return f;
}

DriftSpec zero_drift(int d) {
  DriftSpec s;
  s.d = d;
  return s;
}

DriftSpec damped_drift(int d, double damping) {
  DriftSpec s;
  s.d = d;
  LinearDrift lin;
  lin.F1 = -damping * Eigen::MatrixXd::Identity(d, d);
  lin.F2 = Eigen::MatrixXd::Zero(d, d);
  lin.f0 = Eigen::VectorXd::Zero(d);
  s.regular = lin;
  s.kappa1 = std::max(1.0, std::abs(damping));
  return s;
}

DriftSpec power_law_drift(int d, double alpha, double gamma) {
  DriftSpec s;
  s.d = d;
  PowerLawDrift pl;
  pl.alpha = alpha;
  pl.terms.push_back({gamma, Eigen::VectorXd::Zero(d)});
  s.singular = pl;
  s.validate();
  return s;
}

DriftCheck check_regular_bounds(const DriftSpec& drift, int samples, uint64_t seed) {
  const int d = drift.d;
  rng::NormalStream ns(seed, 0x5eed);
  rng::UniformStream us(seed, 0x5eee);
  DriftCheck out;
  Eigen::VectorXd x(2 * d), y(2 * d), bx(d), by(d);
  uint64_t k = 0;
  for (int s = 0; s < samples; ++s) {
    const double t = us.at(static_cast<uint64_t>(s));
    for (int i = 0; i < 2 * d; ++i) {
      x[i] = 2.0 * ns.at(k++);
      y[i] = 2.0 * ns.at(k++);
    }
    Eigen::VectorXd zero = Eigen::VectorXd::Zero(2 * d);
    drift.regular_value(t, {zero.data(), static_cast<size_t>(2 * d)}, {bx.data(), static_cast<size_t>(d)});
    out.max_origin = std::max(out.max_origin, bx.norm());
    drift.regular_value(t, {x.data(), static_cast<size_t>(2 * d)}, {bx.data(), static_cast<size_t>(d)});
    drift.regular_value(t, {y.data(), static_cast<size_t>(2 * d)}, {by.data(), static_cast<size_t>(d)});
    const double dist = (x - y).norm();
    if (dist > 0) out.max_lipschitz = std::max(out.max_lipschitz, (bx - by).norm() / dist);
  }
  out.ok = out.max_origin <= drift.kappa0 * (1 + 1e-12) && out.max_lipschitz <= drift.kappa1 * (1 + 1e-12);
  return out;
}

// ---- DiffusionSpec ------------------------------------------------------

Eigen::MatrixXd DiffusionSpec::at(double t, std::span<const double> x) const {
  switch (kind) {
    case Kind::identity:
      return Eigen::MatrixXd::Identity(d, d);
    case Kind::constant:
      return matrix;
    case Kind::holder:
      return fn(t, x);
  }
  return Eigen::MatrixXd::Identity(d, d);
}

Eigen::MatrixXd DiffusionSpec::constant_matrix() const {
  if (kind == Kind::holder) throw PreconditionError("DiffusionSpec: Hölder diffusion is not constant");
  return kind == Kind::identity ? Eigen::MatrixXd::Identity(d, d) : matrix;
}

void DiffusionSpec::validate() const {
  if (d < 1) throw ArgumentError("DiffusionSpec: d must be >= 1");
  if (!(kappa0 >= 1.0)) throw DomainError("DiffusionSpec: kappa0 must be >= 1");
  if (!(gamma0 > 0.0 && gamma0 < 1.0)) throw DomainError("DiffusionSpec: gamma0 must lie in (0,1)");
  if (kind == Kind::constant && (matrix.rows() != d || matrix.cols() != d))
    throw ArgumentError("DiffusionSpec: constant matrix must be d x d");
  if (kind == Kind::holder && !fn) throw ArgumentError("DiffusionSpec: empty Hölder callable");
}

bool DiffusionSpec::check_ellipticity(int samples, uint64_t seed) const {
  rng::NormalStream ns(seed, 0xe111);
  rng::UniformStream us(seed, 0xe112);
  uint64_t k = 0;
  Eigen::VectorXd xi(d), x(2 * d);
  for (int s = 0; s < samples; ++s) {
    for (int i = 0; i < d; ++i) xi[i] = ns.at(k++);
    for (int i = 0; i < 2 * d; ++i) x[i] = 2.0 * ns.at(k++);
    xi.normalize();
    const Eigen::MatrixXd sig = at(us.at(static_cast<uint64_t>(s)), {x.data(), static_cast<size_t>(2 * d)});
    const double v = (sig * xi).squaredNorm();
    if (v < 1.0 / kappa0 * (1 - 1e-12) || v > kappa0 * (1 + 1e-12)) return false;
  }
  return true;
}

DiffusionSpec DiffusionSpec::identity(int d) {
  DiffusionSpec s;
  s.d = d;
  return s;
}

DiffusionSpec DiffusionSpec::constant(const Eigen::MatrixXd& sig, double kappa0) {
  DiffusionSpec s;
  s.kind = Kind::constant;
  s.d = static_cast<int>(sig.rows());
  s.matrix = sig;
  s.kappa0 = kappa0;
  return s;
}

// ---- FlowMap ------------------------------------------------------------

FlowMap::FlowMap(DriftSpec drift_spec, FlowIntegrator integ) : drift(std::move(drift_spec)), integrator(integ) {
  drift.validate();
  if (integrator.kind == FlowIntegrator::Kind::rk4 && !(integrator.step > 0.0))
    throw DomainError("FlowMap: rk4 step must be positive");
}

bool FlowMap::closed_form() const {
  return integrator.kind == FlowIntegrator::Kind::closed_form && drift.regular_is_affine();
}

Eigen::MatrixXd FlowMap::generator() const {
  const int d = drift.d;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * d, 2 * d);
  A.bottomLeftCorner(d, d).setIdentity();
  if (const auto* lin = std::get_if<LinearDrift>(&drift.regular)) {
    A.topLeftCorner(d, d) = lin->F1;
    A.topRightCorner(d, d) = lin->F2;
  } else if (std::holds_alternative<CallableDrift>(drift.regular)) {
    throw PreconditionError("FlowMap: generator requires zero or linear b0");
  }
  return A;
}

Eigen::MatrixXd FlowMap::transition(double s, double t) const {
  const int d = drift.d;
  if (std::holds_alternative<ZeroDrift>(drift.regular)) {
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(2 * d, 2 * d);
    P.bottomLeftCorner(d, d) = (t - s) * Eigen::MatrixXd::Identity(d, d);
    return P;
  }
  const Eigen::MatrixXd A = generator() * (t - s);
  return A.exp();
}

namespace {

PhasePoint flow_affine(const FlowMap& map, double s, double t, const PhasePoint& x) {
  const int d = map.drift.d;
  if (std::holds_alternative<ZeroDrift>(map.drift.regular)) {
    PhasePoint out = x;
    out.x2() += (t - s) * x.x1();
    return out;
  }
  const auto& lin = std::get<LinearDrift>(map.drift.regular);
  const Eigen::MatrixXd A = map.generator();
  // Augmented exponential carries the constant forcing exactly.
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(2 * d + 1, 2 * d + 1);
  aug.topLeftCorner(2 * d, 2 * d) = A;
  if (lin.f0.size()) aug.block(0, 2 * d, d, 1) = lin.f0;
  const Eigen::MatrixXd E = (aug * (t - s)).exp();
  Eigen::VectorXd z = E.topLeftCorner(2 * d, 2 * d) * x.vec() + E.block(0, 2 * d, 2 * d, 1);
  if (lin.f0_time) {
    const int panels = 8;
    const double h = (t - s) / panels;
    for (int p = 0; p < panels; ++p) {
      const quad::Rule rule = quad::legendre_on(16, s + p * h, s + (p + 1) * h);
      for (int i = 0; i < rule.size(); ++i) {
        const double r = rule.nodes[i];
        Eigen::VectorXd forcing = Eigen::VectorXd::Zero(2 * d);
        forcing.head(d) = lin.f0_time(r);
        z += rule.weights[i] * ((A * (t - r)).exp() * forcing);
      }
    }
  }
  if (!z.allFinite()) throw IntegrationError("flow: non-finite state");
  return PhasePoint::stacked(z);
}

}  // namespace

PhasePoint flow_rk4(const FlowMap& map, double s, double t, const PhasePoint& x, double step) {
  if (!(step > 0.0)) throw DomainError("flow_rk4: step must be positive");
  const int d = map.drift.d;
  const int n2 = 2 * d;
  if (t == s) return x;
  const int n = std::max(1, static_cast<int>(std::ceil(std::abs(t - s) / step - 1e-9)));
  const double h = (t - s) / n;
  Eigen::VectorXd z = x.vec(), k1(n2), k2(n2), k3(n2), k4(n2), tmp(n2);
  auto rhs = [&](double r, const Eigen::VectorXd& state, Eigen::VectorXd& out) {
    map.drift.regular_value(r, {state.data(), static_cast<size_t>(n2)}, {out.data(), static_cast<size_t>(d)});
    out.tail(d) = state.head(d);
  };
  double r = s;
  for (int i = 0; i < n; ++i) {
    rhs(r, z, k1);
    tmp = z + 0.5 * h * k1;
    rhs(r + 0.5 * h, tmp, k2);
    tmp = z + 0.5 * h * k2;
    rhs(r + 0.5 * h, tmp, k3);
    tmp = z + h * k3;
    rhs(r + h, tmp, k4);
    z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    r = s + (i + 1) * h;
  }
  if (!z.allFinite()) throw IntegrationError("flow: non-finite state during RK4");
  return PhasePoint::stacked(z);
}

PhasePoint flow(const FlowMap& map, double s, double t, const PhasePoint& x) {
  if (x.dim() != map.drift.d) throw ArgumentError("flow: dimension mismatch");
  if (t == s) return x;
  if (map.closed_form()) return flow_affine(map, s, t, x);
  return flow_rk4(map, s, t, x, map.integrator.step);
}

FlowResult flow_checked(const FlowMap& map, double s, double t, const PhasePoint& x) {
  if (map.closed_form() || t == s) return {flow(map, s, t, x), 0.0};
  const PhasePoint coarse = flow_rk4(map, s, t, x, map.integrator.step);
  const PhasePoint fine = flow_rk4(map, s, t, x, 0.5 * map.integrator.step);
  return {fine, (fine.vec() - coarse.vec()).norm() / 15.0};
}

Eigen::MatrixXd flow_jacobian(const FlowMap& map, double s, double t, const PhasePoint& x) {
  if (map.drift.regular_is_affine()) return map.transition(s, t);
  const int n2 = 2 * map.drift.d;
  Eigen::MatrixXd J(n2, n2);
  const double h = 1e-6;
  for (int j = 0; j < n2; ++j) {
    PhasePoint a = x, b = x;
    a[j] += h;
    b[j] -= h;
    J.col(j) = (flow(map, s, t, a).vec() - flow(map, s, t, b).vec()) / (2 * h);
  }
  return J;
}

double flow_comparison_constant(const FlowMap& map, int sample_count, double horizon, uint64_t seed) {
  if (sample_count <= 0) throw ArgumentError("flow_comparison_constant: sample_count must be positive");
  if (!(horizon > 0.0 && horizon <= 1.0)) throw DomainError("flow_comparison_constant: horizon must lie in (0,1]");
  const int d = map.drift.d;
  rng::UniformStream us(seed, 0xc0);
  rng::NormalStream ns(seed, 0xc1);
  uint64_t ku = 0, kn = 0;
  double c = 1.0;
  for (int k = 0; k < sample_count; ++k) {
    double a = us.at(ku++) * horizon, b = us.at(ku++) * horizon;
    const double s = std::min(a, b), t = std::max(a, b);
    if (t - s < 1e-6) continue;
    const double r = s + us.at(ku++) * (t - s);
    PhasePoint x(d), y(d);
    for (int i = 0; i < 2 * d; ++i) {
      x[i] = 3.0 * ns.at(kn++);
      y[i] = 3.0 * ns.at(kn++);
    }
    const ScaleMatrix T(t - s);
    const double lhs = std::sqrt(T.norm_sq(x - flow(map, t, r, y)));
    const double mid = std::sqrt(T.norm_sq(flow(map, r, t, x) - y));
    // c^{-1}(lhs - 1) <= mid <= c(lhs + 1)
    if (lhs > 1.0) c = std::max(c, mid > 0 ? (lhs - 1.0) / mid : INFINITY);
    c = std::max(c, mid / (lhs + 1.0));
  }
  return c;
}

}  // namespace kinetic
