#include "kinetic/pde.hpp"

#include <algorithm>
#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "kinetic/errors.hpp"
#include "kinetic/quadrature.hpp"

namespace kinetic {

// ---- GaussianStep / GaussianTransition ---------------------------------

double GaussianStep::density(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  const Eigen::VectorXd v = L.triangularView<Eigen::Lower>().solve(y - mean(x));
  return std::exp(log_normalizer - 0.5 * v.squaredNorm());
}

Eigen::VectorXd GaussianStep::density_grad_x1(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  const Eigen::VectorXd v = L.triangularView<Eigen::Lower>().solve(y - mean(x));
  return std::exp(log_normalizer - 0.5 * v.squaredNorm()) * (grad_map * v);
}

GaussianTransition::GaussianTransition(FlowMap flow_map, DiffusionSpec diffusion)
    : flow_(std::move(flow_map)), diffusion_(std::move(diffusion)) {
  if (!flow_.drift.regular_is_affine())
    throw PreconditionError("GaussianTransition: b0 must be zero or linear");
  if (!diffusion_.is_constant()) throw PreconditionError("GaussianTransition: sigma must be constant");
  if (diffusion_.d != flow_.dim()) throw ArgumentError("GaussianTransition: dimension mismatch");
  const int d = flow_.dim();
  const Eigen::MatrixXd sig = diffusion_.constant_matrix();
  noise_ = Eigen::MatrixXd::Zero(2 * d, 2 * d);
  noise_.topLeftCorner(d, d) = 2.0 * sig * sig.transpose();
}

Eigen::MatrixXd GaussianTransition::covariance(double s, double t) const {
  const int d = flow_.dim();
  const int n = 2 * d;
  const double tau = t - s;
  if (tau == 0.0) return Eigen::MatrixXd::Zero(n, n);
  if (std::holds_alternative<ZeroDrift>(flow_.drift.regular)) {
    const Eigen::MatrixXd S = 0.5 * noise_.topLeftCorner(d, d);
    Eigen::MatrixXd C(n, n);
    C.topLeftCorner(d, d) = 2.0 * tau * S;
    C.topRightCorner(d, d) = tau * tau * S;
    C.bottomLeftCorner(d, d) = tau * tau * S;
    C.bottomRightCorner(d, d) = (2.0 * tau * tau * tau / 3.0) * S;
    return C;
  }
  // Van Loan: exp([[-A, Q], [0, A^T]] tau) = [[., F12], [0, F22]], C = F22^T F12.
  const Eigen::MatrixXd A = flow_.generator();
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  M.topLeftCorner(n, n) = -A;
  M.topRightCorner(n, n) = noise_;
  M.bottomRightCorner(n, n) = A.transpose();
  const Eigen::MatrixXd E = (M * tau).exp();
  Eigen::MatrixXd C = E.bottomRightCorner(n, n).transpose() * E.topRightCorner(n, n);
  return 0.5 * (C + C.transpose());
}

GaussianStep GaussianTransition::step(double s, double t) const {
  if (!(t > s)) throw DomainError("GaussianTransition: requires t > s");
  const int d = flow_.dim();
  GaussianStep g;
  g.d = d;
  g.s = s;
  g.t = t;
  g.Phi = flow_.transition(s, t);
  g.shift = flow(flow_, s, t, PhasePoint(d)).vec();
  g.C = covariance(s, t);
  Eigen::LLT<Eigen::MatrixXd> llt(g.C);
  if (llt.info() != Eigen::Success) throw NumericalError("GaussianTransition: covariance not positive definite");
  g.L = llt.matrixL();
  const Eigen::MatrixXd LinvPhi = g.L.triangularView<Eigen::Lower>().solve(g.Phi);
  g.grad_map = LinvPhi.transpose().topRows(d);
  double logdet_half = 0.0;
  for (int i = 0; i < 2 * d; ++i) logdet_half += std::log(g.L(i, i));
  g.log_normalizer = -d * std::log(2.0 * M_PI) - logdet_half;
  return g;
}

double GaussianTransition::density(double s, const PhasePoint& x, double t, const PhasePoint& y) const {
  return step(s, t).density(x.vec(), y.vec());
}

// ---- whitened Gauss-Hermite -------------------------------------------

namespace {

struct WhiteRule {
  int dims = 0;
  std::vector<double> u;  // dims entries per node
  std::vector<double> w;  // normalized to a probability rule
};

WhiteRule white_rule(int dims, int n) {
  const quad::Rule& gh = quad::gauss_hermite(n);
  WhiteRule r;
  r.dims = dims;
  std::vector<int> idx(dims, 0);
  const double norm = std::pow(M_PI, -0.5 * dims);
  while (true) {
    double w = norm;
    for (int a = 0; a < dims; ++a) {
      r.u.push_back(std::sqrt(2.0) * gh.nodes[idx[a]]);
      w *= gh.weights[idx[a]];
    }
    r.w.push_back(w);
    int a = 0;
    while (a < dims && ++idx[a] == n) idx[a++] = 0;
    if (a == dims) break;
  }
  return r;
}

// Node offsets L u and gradient weights G u for one Gaussian step.
struct StepNodes {
  std::vector<double> offset;  // 2d per node
  std::vector<double> gw;      // d per node
};

StepNodes step_nodes(const GaussianStep& g, const WhiteRule& wr) {
  const int n2 = 2 * g.d;
  const size_t m = wr.w.size();
  StepNodes sn;
  sn.offset.resize(m * n2);
  sn.gw.resize(m * g.d);
  Eigen::VectorXd u(n2);
  for (size_t q = 0; q < m; ++q) {
    for (int a = 0; a < n2; ++a) u[a] = wr.u[q * n2 + a];
    const Eigen::VectorXd o = g.L * u;
    const Eigen::VectorXd gw = g.grad_map * u;
    for (int a = 0; a < n2; ++a) sn.offset[q * n2 + a] = o[a];
    for (int c = 0; c < g.d; ++c) sn.gw[q * g.d + c] = gw[c];
  }
  return sn;
}

}  // namespace

double apply_semigroup(const GaussianTransition& trans, const ScalarField& f, double s, double t, const PhasePoint& x,
                       int nodes) {
  const GaussianStep g = trans.step(s, t);
  const int n2 = 2 * g.d;
  const WhiteRule wr = white_rule(n2, nodes);
  const StepNodes sn = step_nodes(g, wr);
  const Eigen::VectorXd m = g.mean(x.vec());
  std::vector<double> y(n2);
  double acc = 0.0;
  for (size_t q = 0; q < wr.w.size(); ++q) {
    for (int a = 0; a < n2; ++a) y[a] = m[a] + sn.offset[q * n2 + a];
    acc += wr.w[q] * f(t, y);
  }
  return acc;
}

Eigen::VectorXd apply_semigroup_gradient(const GaussianTransition& trans, const ScalarField& f, double s, double t,
                                         const PhasePoint& x, int nodes) {
  const GaussianStep g = trans.step(s, t);
  const int n2 = 2 * g.d;
  const WhiteRule wr = white_rule(n2, nodes);
  const StepNodes sn = step_nodes(g, wr);
  const Eigen::VectorXd m = g.mean(x.vec());
  std::vector<double> y(n2);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(g.d);
  for (size_t q = 0; q < wr.w.size(); ++q) {
    for (int a = 0; a < n2; ++a) y[a] = m[a] + sn.offset[q * n2 + a];
    const double v = wr.w[q] * f(t, y);
    for (int c = 0; c < g.d; ++c) acc[c] += v * sn.gw[q * g.d + c];
  }
  return acc;
}

namespace {

// Shared time quadrature for I_f and its gradient; `mode` 0 value, 1 gradient,
// 2 value + |gradient| norm with |h| (operator norm).
void i_operator_impl(const GaussianTransition& trans, const ScalarField& f, double s, const PhasePoint& x, double T,
                     const SemigroupNodes& nodes, double* value, Eigen::VectorXd* grad, double* abs_grad) {
  if (!(T > s)) throw DomainError("i_operator: requires s < T");
  const int d = trans.dim();
  const int n2 = 2 * d;
  const WhiteRule wr = white_rule(n2, nodes.space);
  const quad::Rule wq = quad::legendre_on(nodes.time, 0.0, std::sqrt(T - s));
  std::vector<double> y(n2);
  if (value) *value = 0.0;
  if (grad) *grad = Eigen::VectorXd::Zero(d);
  if (abs_grad) *abs_grad = 0.0;
  for (int j = 0; j < wq.size(); ++j) {
    const double w = wq.nodes[j];
    const double r = s + w * w;
    const double W = 2.0 * w * wq.weights[j];
    const GaussianStep g = trans.step(s, r);
    const StepNodes sn = step_nodes(g, wr);
    const Eigen::VectorXd m = g.mean(x.vec());
    double v_acc = 0.0, a_acc = 0.0;
    Eigen::VectorXd g_acc = Eigen::VectorXd::Zero(d);
    for (size_t q = 0; q < wr.w.size(); ++q) {
      for (int a = 0; a < n2; ++a) y[a] = m[a] + sn.offset[q * n2 + a];
      const double fv = wr.w[q] * f(r, y);
      v_acc += fv;
      double norm2 = 0.0;
      for (int c = 0; c < d; ++c) {
        g_acc[c] += fv * sn.gw[q * d + c];
        norm2 += sn.gw[q * d + c] * sn.gw[q * d + c];
      }
      a_acc += std::abs(fv) * std::sqrt(norm2);
    }
    if (!std::isfinite(v_acc) || !g_acc.allFinite())
      throw IntegrationError("i_operator: non-finite inner quadrature at r = " + std::to_string(r));
    if (value) *value += W * (abs_grad ? std::abs(v_acc) : v_acc);
    if (grad) *grad += W * g_acc;
    if (abs_grad) *abs_grad += W * a_acc;
  }
}

}  // namespace

double i_operator(const GaussianTransition& trans, const ScalarField& f, double s, const PhasePoint& x, double T,
                  const SemigroupNodes& nodes) {
  double v;
  i_operator_impl(trans, f, s, x, T, nodes, &v, nullptr, nullptr);
  return v;
}

Eigen::VectorXd i_operator_gradient(const GaussianTransition& trans, const ScalarField& f, double s,
                                    const PhasePoint& x, double T, const SemigroupNodes& nodes) {
  Eigen::VectorXd g;
  i_operator_impl(trans, f, s, x, T, nodes, nullptr, &g, nullptr);
  return g;
}

double picard_operator_norm(const GaussianTransition& trans, const ScalarField& h, double T,
                            const std::vector<double>& lo, const std::vector<double>& hi, int resolution,
                            const SemigroupNodes& nodes) {
  const int d = trans.dim();
  const int n2 = 2 * d;
  if (static_cast<int>(lo.size()) != n2 || static_cast<int>(hi.size()) != n2)
    throw ArgumentError("picard_operator_norm: box must have 2d bounds");
  std::vector<UniformAxis> axes;
  for (int a = 0; a < n2; ++a) axes.push_back({lo[a], hi[a], hi[a] > lo[a] ? resolution : 1});
  const TensorGrid grid(axes);
  const ScalarField ah = h.abs();
  std::vector<double> vals(grid.size());
#pragma omp parallel for schedule(dynamic)
  for (size_t i = 0; i < grid.size(); ++i) {
    const PhasePoint x = PhasePoint::from_span(grid.node(i));
    double v, a;
    i_operator_impl(trans, ah, 0.0, x, T, nodes, &v, nullptr, &a);
    vals[i] = v + a;
  }
  return *std::max_element(vals.begin(), vals.end());
}

// ---- GridFunction -------------------------------------------------------

GridFunction::GridFunction(std::vector<double> time_nodes, TensorGrid space, int d)
    : times_(std::move(time_nodes)), space_(std::move(space)), d_(d) {
  if (times_.size() < 2) throw ArgumentError("GridFunction: need at least two time nodes");
  for (size_t i = 1; i < times_.size(); ++i)
    if (!(times_[i] > times_[i - 1])) throw ArgumentError("GridFunction: time nodes must increase");
  if (space_.rank() != 2 * d) throw ArgumentError("GridFunction: space grid must have rank 2d");
  values_.assign(times_.size() * space_.size(), 0.0);
  grads_.assign(times_.size() * space_.size() * d, 0.0);
}

void GridFunction::locate_time(double t, size_t& i, double& frac) const {
  if (t <= times_.front()) {
    i = 0;
    frac = 0.0;
    return;
  }
  if (t >= times_.back()) {
    i = times_.size() - 2;
    frac = 1.0;
    return;
  }
  i = static_cast<size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin()) - 1;
  frac = (t - times_[i]) / (times_[i + 1] - times_[i]);
}

int GridFunction::stencil(std::span<const double> x, size_t* nodes, double* weights) const {
  const int r = space_.rank();
  double frac[16];
  size_t stride[16];
  size_t s = 1;
  for (int k = r - 1; k >= 0; --k) {
    stride[k] = s;
    s *= static_cast<size_t>(space_.axis(k).n);
  }
  size_t base_flat = 0;
  for (int k = 0; k < r; ++k) {
    const UniformAxis& a = space_.axis(k);
    if (a.n == 1) {
      frac[k] = 0.0;
      continue;
    }
    double u = std::clamp((x[k] - a.lo) / a.step(), 0.0, static_cast<double>(a.n - 1));
    int i = std::min(static_cast<int>(u), a.n - 2);
    frac[k] = u - i;
    base_flat += stride[k] * static_cast<size_t>(i);
  }
  int count = 0;
  for (int m = 0; m < (1 << r); ++m) {
    double w = 1.0;
    size_t f = base_flat;
    bool skip = false;
    for (int k = 0; k < r; ++k) {
      const bool up = (m >> k) & 1;
      if (space_.axis(k).n == 1) {
        if (up) skip = true;
        continue;
      }
      w *= up ? frac[k] : 1.0 - frac[k];
      if (up) f += stride[k];
    }
    if (skip || w == 0.0) continue;
    nodes[count] = f;
    weights[count] = w;
    ++count;
  }
  return count;
}

double GridFunction::value_at(double t, std::span<const double> x) const {
  size_t ti;
  double ft;
  locate_time(t, ti, ft);
  size_t nodes[64];
  double w[64];
  const int c = stencil(x, nodes, w);
  double a = 0.0, b = 0.0;
  for (int k = 0; k < c; ++k) {
    a += w[k] * value(ti, nodes[k]);
    b += w[k] * value(ti + 1, nodes[k]);
  }
  return (1 - ft) * a + ft * b;
}

void GridFunction::grad_at(double t, std::span<const double> x, std::span<double> out) const {
  size_t ti;
  double ft;
  locate_time(t, ti, ft);
  size_t nodes[64];
  double w[64];
  const int c = stencil(x, nodes, w);
  for (int i = 0; i < d_; ++i) out[i] = 0.0;
  for (int k = 0; k < c; ++k)
    for (int i = 0; i < d_; ++i)
      out[i] += w[k] * ((1 - ft) * grad(ti, nodes[k], i) + ft * grad(ti + 1, nodes[k], i));
}

double GridFunction::sup_value() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double GridFunction::sup_grad() const {
  double m = 0.0;
  for (double v : grads_) m = std::max(m, std::abs(v));
  return m;
}

double GridFunction::distance(const GridFunction& o) const {
  if (o.values_.size() != values_.size()) throw ArgumentError("GridFunction: shape mismatch");
  double a = 0.0, b = 0.0;
  for (size_t i = 0; i < values_.size(); ++i) a = std::max(a, std::abs(values_[i] - o.values_[i]));
  for (size_t i = 0; i < grads_.size(); ++i) b = std::max(b, std::abs(grads_[i] - o.grads_[i]));
  return a + b;
}

GridTemplate GridTemplate::automatic(const GaussianTransition& trans, double T, int nodes_per_axis, int time_slices,
                                     double min_half_width) {
  const int d = trans.dim();
  const Eigen::MatrixXd C = trans.covariance(0.0, T);
  // Two-sided normal tail of 1e-6 per axis.
  const double z = 4.8916;
  GridTemplate g;
  g.time_slices = time_slices;
  for (int a = 0; a < 2 * d; ++a) {
    const double half = std::max(min_half_width, z * std::sqrt(C(a, a)));
    g.space.push_back({-half, half, nodes_per_axis});
  }
  return g;
}

// ---- Picard ---------------------------------------------------------------

double kato_of_drift(const VectorField& b1, double lambda, double T, double box, const KatoNodes& nodes) {
  KatoQuery q;
  q.f = b1.magnitude();
  q.lambda = lambda;
  q.beta = 1.0;
  q.delta = T;
  GridSearch g = GridSearch::box(b1.d, box, 9);
  g.t_lo = 0.0;
  g.t_hi = T;
  q.search = g;
  q.nodes = nodes;
  return kato_functional(q).value;
}

double required_horizon(const VectorField& b1, double C1, double lambda, double limit, double box,
                        const KatoNodes& nodes) {
  auto g = [&](double T) { return C1 * kato_of_drift(b1, lambda, T, box, nodes); };
  if (g(1.0) <= limit) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == 0.0) break;
    (g(mid) <= limit ? lo : hi) = mid;
    if (hi - lo < 1e-4 * hi) break;
  }
  return lo;
}

FittedConstant fit_picard_constant(const GaussianTransition& trans, const std::vector<VectorField>& family,
                                   const std::vector<double>& horizons, double lambda, double box,
                                   Calibration calibration, int resolution, const KatoNodes& nodes) {
  if (family.empty() || horizons.empty()) throw ArgumentError("fit_picard_constant: empty calibration");
  const int d = trans.dim();
  const std::vector<double> lo(2 * d, -box), hi(2 * d, box);
  std::vector<double> ratios;
  for (const VectorField& b : family)
    for (double T : horizons) {
      const double op = picard_operator_norm(trans, b.magnitude(), T, lo, hi, resolution);
      const double k = kato_of_drift(b, lambda, T, box, nodes);
      if (!(k > 0.0)) throw NumericalError("fit_picard_constant: vanishing Kato value in calibration");
      ratios.push_back(op / k);
    }
  return fit_max_ratio("C1", ratios, calibration);
}

namespace {

struct SliceQuadrature {
  std::vector<double> r, W;
  std::vector<GaussianStep> steps;
  std::vector<StepNodes> nodes;
};

}  // namespace

PicardResult picard_solve(const GaussianTransition& trans, const VectorField& b1, const ScalarField& f, double T,
                          const GridTemplate& tmpl, const PicardOptions& opt) {
  if (!(T > 0.0)) throw DomainError("picard_solve: T must be positive");
  if (tmpl.time_slices < 2) throw ArgumentError("picard_solve: need at least two time slices");
  const int d = trans.dim();
  const int n2 = 2 * d;
  if (b1.d != d || f.d != d) throw ArgumentError("picard_solve: field dimension mismatch");
  if (static_cast<int>(tmpl.space.size()) != n2) throw ArgumentError("picard_solve: grid must have 2d axes");

  PicardResult res;
  res.T = T;
  if (opt.C1.value > 0.0) {
    res.kato_b1 = kato_of_drift(b1, opt.lambda, T, opt.kato_box, opt.kato_nodes);
    res.smallness = opt.C1.value * res.kato_b1;
    if (!(res.smallness < opt.smallness_limit)) {
      const double need = required_horizon(b1, opt.C1.value, opt.lambda, opt.smallness_limit, opt.kato_box,
                                           opt.kato_nodes);
      throw SmallnessError("picard_solve: smallness condition fails; horizon must be at most " +
                               std::to_string(need),
                           need);
    }
  }

  std::vector<double> times(tmpl.time_slices);
  for (int i = 0; i < tmpl.time_slices; ++i) times[i] = T * i / (tmpl.time_slices - 1);
  const TensorGrid space(tmpl.space);
  const size_t ns = space.size();
  const size_t nt = times.size();

  const WhiteRule wr = white_rule(n2, opt.nodes.space);
  const size_t mq = wr.w.size();
  std::vector<SliceQuadrature> sq(nt - 1);
  for (size_t i = 0; i + 1 < nt; ++i) {
    const quad::Rule wq = quad::legendre_on(opt.nodes.time, 0.0, std::sqrt(T - times[i]));
    for (int j = 0; j < wq.size(); ++j) {
      const double w = wq.nodes[j];
      sq[i].r.push_back(times[i] + w * w);
      sq[i].W.push_back(2.0 * w * wq.weights[j]);
      sq[i].steps.push_back(trans.step(times[i], times[i] + w * w));
      sq[i].nodes.push_back(step_nodes(sq[i].steps.back(), wr));
    }
  }

  // One sweep: out = I_{source}, with source(r, y) supplied per quadrature point.
  auto sweep = [&](auto&& source, GridFunction& out) {
    for (size_t i = 0; i + 1 < nt; ++i) {
      const SliceQuadrature& Q = sq[i];
#pragma omp parallel for schedule(static)
      for (size_t node = 0; node < ns; ++node) {
        double xb[16], y[16], gacc[8];
        space.node(node, {xb, static_cast<size_t>(n2)});
        const Eigen::Map<const Eigen::VectorXd> xv(xb, n2);
        double vacc = 0.0;
        for (int c = 0; c < d; ++c) gacc[c] = 0.0;
        for (size_t j = 0; j < Q.r.size(); ++j) {
          const Eigen::VectorXd m = Q.steps[j].mean(xv);
          const StepNodes& sn = Q.nodes[j];
          double v = 0.0, g[8] = {0, 0, 0, 0, 0, 0, 0, 0};
          for (size_t q = 0; q < mq; ++q) {
            for (int a = 0; a < n2; ++a) y[a] = m[a] + sn.offset[q * n2 + a];
            const double s = wr.w[q] * source(Q.r[j], std::span<const double>(y, n2));
            v += s;
            for (int c = 0; c < d; ++c) g[c] += s * sn.gw[q * d + c];
          }
          vacc += Q.W[j] * v;
          for (int c = 0; c < d; ++c) gacc[c] += Q.W[j] * g[c];
        }
        out.value(i, node) = vacc;
        for (int c = 0; c < d; ++c) out.grad(i, node, c) = gacc[c];
      }
    }
  };

  GridFunction base(times, space, d);
  sweep([&](double r, std::span<const double> y) { return f(r, y); }, base);

  GridFunction u(times, space, d);  // u^0 = 0
  for (int k = 0; k < opt.max_iter; ++k) {
    GridFunction next(times, space, d);
    if (k == 0) {
      next = base;
    } else {
      sweep(
          [&](double r, std::span<const double> y) {
            double bv[8], gv[8];
            b1(r, y, {bv, static_cast<size_t>(d)});
            bool zero = true;
            for (int c = 0; c < d; ++c) zero = zero && bv[c] == 0.0;
            if (zero) return 0.0;
            u.grad_at(r, y, {gv, static_cast<size_t>(d)});
            double acc = 0.0;
            for (int c = 0; c < d; ++c) acc += bv[c] * gv[c];
            return acc;
          },
          next);
      // u^{k+1} = I_f + I_{b1 . grad u^k}
      for (size_t i = 0; i + 1 < nt; ++i)
        for (size_t node = 0; node < ns; ++node) {
          next.value(i, node) += base.value(i, node);
          for (int c = 0; c < d; ++c) next.grad(i, node, c) += base.grad(i, node, c);
        }
    }
    const double delta = next.distance(u);
    res.history.push_back(delta);
    u = std::move(next);
    res.iterations = k + 1;
    if (delta == 0.0 || delta <= opt.tol * res.history.front()) {
      res.u = std::move(u);
      return res;
    }
  }
  throw ConvergenceError("picard_solve: no convergence within max_iter", res.history);
}

}  // namespace kinetic
