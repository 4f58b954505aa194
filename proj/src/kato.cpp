#include "kinetic/kato.hpp"

#include <algorithm>
#include <cmath>

#include "kinetic/errors.hpp"
#include "kinetic/kernel.hpp"
#include "kinetic/quadrature.hpp"

namespace kinetic {
namespace {

double unit_sphere_area(int d) { return 2.0 * std::pow(M_PI, 0.5 * d) / std::tgamma(0.5 * d); }

void check_beta(double beta) {
  if (!(beta >= 0.0)) throw DomainError("kato: beta must be nonnegative");
  if (!(beta < 2.0)) throw DomainError("kato: beta >= 2 gives a non-integrable time singularity");
}

}  // namespace

GridSearch GridSearch::box(int d, double half_width, int resolution) {
  GridSearch g;
  g.lo.assign(2 * d, -half_width);
  g.hi.assign(2 * d, half_width);
  g.resolution = resolution;
  return g;
}

double kato_integral_at(const ScalarField& f, double lambda, double beta, double delta, double t,
                        const PhasePoint& x, const KatoNodes& nodes, long* evals) {
  check_beta(beta);
  if (!(lambda > 0.0) || !(delta > 0.0)) throw DomainError("kato: lambda and delta must be positive");
  const int d = f.d;
  const int n2 = 2 * d;
  if (x.dim() != d) throw ArgumentError("kato: point dimension mismatch");
  const std::vector<int> axes = f.axes();
  const int k = static_cast<int>(axes.size());
  // Double-exponential rules in r and on each active half-axis: singularities of f
  // sitting exactly at the evaluation point (where the sup is usually attained)
  // fall on the clustered ends instead of on a node.
  const quad::Rule rt = quad::tanh_sinh_left_on(nodes.time, 0.0, delta);
  const quad::Rule rs = quad::exp_sinh_gaussian(nodes.space, lambda);
  const int m = rs.size();
  const double inactive = std::pow(M_PI / lambda, 0.5 * (n2 - k));
  const int patterns = 1 << k;

  std::vector<double> z(x.span().begin(), x.span().end());
  std::vector<int> idx(k);
  double total = 0.0;
  long count = 0;
  for (int it = 0; it < rt.size(); ++it) {
    const double r = rt.nodes[it];
    if (!(r > 0.0)) continue;
    const double s1 = std::sqrt(r), s2 = r * s1;
    double inner = 0.0;
    std::fill(idx.begin(), idx.end(), 0);
    while (true) {
      double w = 1.0;
      for (int a = 0; a < k; ++a) w *= rs.weights[idx[a]];
      double v = 0.0;
      for (int sgn = 0; sgn < patterns; ++sgn) {
        for (int a = 0; a < k; ++a) {
          const int ax = axes[a];
          const double scale = ax < d ? s1 : s2;
          const double off = scale * rs.nodes[idx[a]];
          z[ax] = (sgn >> a) & 1 ? x[ax] - off : x[ax] + off;
        }
        if (f.time_independent) {
          v += 2.0 * std::abs(f(t, z));
          ++count;
        } else {
          v += std::abs(f(t + r, z)) + std::abs(f(t - r, z));
          count += 2;
        }
      }
      inner += w * v;
      int a = 0;
      while (a < k && ++idx[a] == m) idx[a++] = 0;
      if (a == k) break;
    }
    // Symmetric in y: the x - y terms equal the x + y terms.
    total += rt.weights[it] * std::pow(r, -0.5 * beta) * 2.0 * inner;
  }
  if (evals) *evals += count;
  return total * inactive;
}

namespace {

struct SearchPoint {
  double t;
  std::vector<double> x;
};

}  // namespace

KatoEstimate kato_functional(const KatoQuery& q) {
  check_beta(q.beta);
  if (!(q.lambda > 0.0)) throw DomainError("kato_functional: lambda must be positive");
  if (!(q.delta > 0.0)) throw DomainError("kato_functional: delta must be positive");
  const int d = q.f.d;
  KatoEstimate est;
  KatoNodes doubled{2 * q.nodes.space, 2 * q.nodes.time};

  if (const auto* fp = std::get_if<FixedPoint>(&q.search)) {
    est.value = kato_integral_at(q.f, q.lambda, q.beta, q.delta, fp->t, fp->x, q.nodes, &est.nodes_used);
    const double fine = kato_integral_at(q.f, q.lambda, q.beta, q.delta, fp->t, fp->x, doubled, &est.nodes_used);
    est.quad_error = std::abs(fine - est.value);
    est.argsup_t = fp->t;
    est.argsup_x = fp->x;
    return est;
  }

  const auto& g = std::get<GridSearch>(q.search);
  if (static_cast<int>(g.lo.size()) != 2 * d || static_cast<int>(g.hi.size()) != 2 * d)
    throw ArgumentError("kato_functional: search box must have 2d bounds");
  if (g.resolution < 1) throw ArgumentError("kato_functional: resolution must be >= 1");

  // Searched coordinates: index -1 is time, others are space axes.
  std::vector<int> dims;
  const bool search_time = !q.f.time_independent && g.t_hi > g.t_lo;
  est.time_window_restricted = !q.f.time_independent;
  if (search_time) dims.push_back(-1);
  for (int a : q.f.axes())
    if (g.hi[a] > g.lo[a]) dims.push_back(a);
  const int k = static_cast<int>(dims.size());

  auto lo_of = [&](int a) { return a < 0 ? g.t_lo : g.lo[a]; };
  auto hi_of = [&](int a) { return a < 0 ? g.t_hi : g.hi[a]; };

  SearchPoint base;
  base.t = 0.5 * (g.t_lo + g.t_hi);
  base.x.resize(2 * d);
  for (int i = 0; i < 2 * d; ++i) base.x[i] = 0.5 * (g.lo[i] + g.hi[i]);

  auto evaluate = [&](std::vector<SearchPoint>& pts, std::vector<double>& vals) {
    vals.assign(pts.size(), 0.0);
    std::vector<long> counts(pts.size(), 0);
#pragma omp parallel for schedule(dynamic)
    for (size_t i = 0; i < pts.size(); ++i) {
      vals[i] = kato_integral_at(q.f, q.lambda, q.beta, q.delta, pts[i].t,
                                 PhasePoint::from_span(pts[i].x), q.nodes, &counts[i]);
    }
    for (long c : counts) est.nodes_used += c;
  };
  auto set_coord = [](SearchPoint& p, int a, double v) {
    if (a < 0)
      p.t = v;
    else
      p.x[a] = v;
  };
  auto get_coord = [](const SearchPoint& p, int a) { return a < 0 ? p.t : p.x[a]; };

  // Coarse grid.
  std::vector<SearchPoint> pts;
  {
    std::vector<int> idx(k, 0);
    const int res = g.resolution;
    while (true) {
      SearchPoint p = base;
      for (int a = 0; a < k; ++a) {
        const double lo = lo_of(dims[a]), hi = hi_of(dims[a]);
        set_coord(p, dims[a], res == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * idx[a] / (res - 1));
      }
      pts.push_back(p);
      int a = 0;
      while (a < k && ++idx[a] == res) idx[a++] = 0;
      if (a == k) break;
    }
  }
  std::vector<double> vals;
  evaluate(pts, vals);
  size_t best = static_cast<size_t>(std::max_element(vals.begin(), vals.end()) - vals.begin());
  SearchPoint incumbent = pts[best];
  double best_val = vals[best];

  std::vector<double> h(k);
  for (int a = 0; a < k; ++a)
    h[a] = (hi_of(dims[a]) - lo_of(dims[a])) / std::max(1, g.resolution - 1);
  double last_gain = 0.0;
  for (int round = 0; round < g.refine_steps && k > 0; ++round) {
    for (double& v : h) v *= 0.5;
    pts.clear();
    std::vector<int> idx(k, 0);
    while (true) {
      bool centre = true;
      SearchPoint p = incumbent;
      for (int a = 0; a < k; ++a) {
        const int off = idx[a] - 1;
        if (off != 0) centre = false;
        const double v = std::clamp(get_coord(incumbent, dims[a]) + off * h[a], lo_of(dims[a]), hi_of(dims[a]));
        set_coord(p, dims[a], v);
      }
      if (!centre) pts.push_back(p);
      int a = 0;
      while (a < k && ++idx[a] == 3) idx[a++] = 0;
      if (a == k) break;
    }
    evaluate(pts, vals);
    const size_t b = static_cast<size_t>(std::max_element(vals.begin(), vals.end()) - vals.begin());
    last_gain = 0.0;
    if (vals[b] > best_val) {
      last_gain = (vals[b] - best_val) / std::max(best_val, 1e-300);
      best_val = vals[b];
      incumbent = pts[b];
    }
  }
  est.search_converged = last_gain <= 1e-3;
  est.value = best_val;
  est.argsup_t = incumbent.t;
  est.argsup_x = PhasePoint::from_span(incumbent.x);
  const double fine =
      kato_integral_at(q.f, q.lambda, q.beta, q.delta, est.argsup_t, est.argsup_x, doubled, &est.nodes_used);
  est.quad_error = std::abs(fine - est.value);
  return est;
}

double kato_constant_closed_form(double c, double lambda, double beta, double delta, int d) {
  check_beta(beta);
  return 4.0 * std::abs(c) * std::pow(M_PI / lambda, d) * std::pow(delta, 1.0 - 0.5 * beta) / (1.0 - 0.5 * beta);
}

double kato_power_law_closed_form(double alpha, double lambda, double delta, int d) {
  if (!(alpha > 1.0 && alpha < 4.0 / 3.0)) throw DomainError("power law: alpha must lie in (1, 4/3)");
  const double ball = unit_sphere_area(d) / (d + 1.0 - alpha);
  const double gauss = std::pow(M_PI / lambda, 0.5 * d);
  return 2.0 * std::pow(delta, 2.0 - 1.5 * alpha) / (4.0 - 3.0 * alpha) * (ball + gauss);
}

double kato_power_law_bound(double alpha, double lambda, double delta, int d) {
  return 4.0 * std::pow(M_PI / lambda, 0.5 * d) * kato_power_law_closed_form(alpha, lambda, delta, d);
}

double kato_power_law_exact(double alpha, double lambda, double beta, double delta, int d) {
  if (!(alpha > 1.0 && alpha < 4.0 / 3.0)) throw DomainError("power law: alpha must lie in (1, 4/3)");
  check_beta(beta);
  const double e = 1.0 - 0.5 * beta + 1.5 * (1.0 - alpha);
  if (!(e > 0.0)) throw DomainError("power law: time integral diverges for this beta");
  const double radial = unit_sphere_area(d) * std::tgamma(0.5 * (d + 1.0 - alpha)) /
                        (2.0 * std::pow(lambda, 0.5 * (d + 1.0 - alpha)));
  return 4.0 * std::pow(M_PI / lambda, 0.5 * d) * radial * std::pow(delta, e) / e;
}

double MixedNormSpec::kappa() const {
  const size_t n2 = p.size();
  const size_t d = n2 / 2;
  double s = 0.0;
  for (size_t i = 0; i < n2; ++i) s += (i < d ? 1.0 : 3.0) / p[i];
  return 2.0 - (s + 2.0 / q);
}

double mixed_norm_kato_bound(const MixedNormSpec& spec, double f_norm, double beta, double T, double lambda) {
  if (spec.p.empty() || spec.p.size() % 2 != 0) throw ArgumentError("mixed norm: p must have 2d entries");
  if (!(spec.q >= 1.0)) throw DomainError("mixed norm: q must be >= 1");
  for (double pi : spec.p)
    if (!(pi >= 1.0)) throw DomainError("mixed norm: p entries must be >= 1");
  const double kappa = spec.kappa();
  if (!(kappa > beta)) throw PreconditionError("mixed norm: embedding requires kappa > beta");
  if (!(beta >= 0.0)) throw DomainError("mixed norm: beta must be nonnegative");
  if (!(T > 0.0 && T <= 1.0)) throw DomainError("mixed norm: T must lie in (0,1]");
  if (f_norm == 0.0) return 0.0;
  const size_t n2 = spec.p.size();
  const size_t d = n2 / 2;
  // Conjugate exponents; 1/pbar = 1 - 1/p.
  double eta_norm = 1.0;
  double gamma = -0.5 * beta - 2.0 * d;
  for (size_t i = 0; i < n2; ++i) {
    const double inv_pbar = 1.0 - 1.0 / spec.p[i];
    if (inv_pbar > 0.0) eta_norm *= std::pow(M_PI * inv_pbar / lambda, 0.5 * inv_pbar);
    gamma += (i < d ? 0.5 : 1.5) * inv_pbar;
  }
  const double inv_qbar = 1.0 - 1.0 / spec.q;
  // (int_0^T s^{gamma qbar} ds)^{1/qbar} = T^{gamma + 1/qbar} / (gamma qbar + 1)^{1/qbar}.
  const double qbar = 1.0 / inv_qbar;
  const double time = std::pow(T, gamma + inv_qbar) / std::pow(gamma * qbar + 1.0, inv_qbar);
  return 4.0 * eta_norm * time * f_norm;
}

double holder_improvement_bound(double gamma, double K_gamma, double beta, double lambda, double r, int d) {
  if (!(gamma > 1.0)) throw DomainError("holder bound: gamma must exceed 1");
  if (!(beta >= 0.0 && beta < 2.0)) throw DomainError("holder bound: beta must lie in [0,2)");
  if (!(r > 0.0 && r < 1.0)) throw DomainError("holder bound: r must lie in (0,1)");
  const double mass = 4.0 * std::pow(M_PI / lambda, d) * (2.0 / (2.0 - beta)) * std::pow(r, 0.5 * (2.0 - beta));
  return std::pow(K_gamma, 1.0 / gamma) * std::pow(mass, (gamma - 1.0) / gamma);
}

double local_l1_from_kato(const KatoEstimate& estimate, double delta, double lambda, double beta, int d) {
  if (!(delta > 0.0 && delta < 1.0) || !(lambda > 0.0 && lambda < 1.0))
    throw DomainError("local L1 bound: delta and lambda must lie in (0,1)");
  if (!(beta > 0.0)) throw DomainError("local L1 bound: the dyadic constant needs beta > 0");
  const double C = std::pow(static_cast<double>(d), 2.0 * d) / (1.0 - std::pow(2.0, -0.5 * beta));
  return C * std::exp(10.0 * lambda) * std::pow(delta, 0.5 * beta + 2.0 * d) * estimate.value;
}

double local_tube_integral(const ScalarField& f, double t, const PhasePoint& x, double delta, int nodes) {
  if (f.d != 1) throw ArgumentError("local_tube_integral: d = 1 only");
  const quad::Rule rr = quad::legendre_on(nodes, 0.0, delta);
  const quad::Rule r1 = quad::legendre_on(nodes, -std::sqrt(delta), std::sqrt(delta));
  const quad::Rule r2 = quad::legendre_on(nodes, -std::pow(delta, 1.5), std::pow(delta, 1.5));
  double total = 0.0;
  double z[2];
  for (int a = 0; a < rr.size(); ++a)
    for (int b = 0; b < r1.size(); ++b)
      for (int c = 0; c < r2.size(); ++c) {
        double v = 0.0;
        for (int st : {-1, 1})
          for (int sy : {-1, 1}) {
            z[0] = x[0] + sy * r1.nodes[b];
            z[1] = x[1] + sy * r2.nodes[c];
            v += std::abs(f(t + st * rr.nodes[a], {z, 2}));
          }
        total += rr.weights[a] * r1.weights[b] * r2.weights[c] * v;
      }
  return total;
}

double convolution_kappa(double c0) { return 1.0 / (16.0 * std::pow(c0, 4)); }

double convolution_lhs(const FlowMap& fm, double lambda, double alpha, double beta, const ScalarField& f, double s,
                       const PhasePoint& x, double t, const PhasePoint& y, int space_nodes, int time_nodes) {
  if (beta < alpha) throw PreconditionError("convolution check: beta must be >= alpha");
  if (!(s < t)) throw DomainError("convolution check: requires s < t");
  const int d = fm.dim();
  const int n2 = 2 * d;
  const KernelParams pa{lambda, alpha, d}, pb{lambda, beta, d};
  const double mid = 0.5 * (s + t);
  const quad::Rule gh = quad::hermite_scaled(space_nodes, lambda);
  const int m = gh.size();
  std::vector<int> idx(n2);
  Eigen::VectorXd uv(n2);
  double total = 0.0;

  auto tensor = [&](auto&& body) {
    std::fill(idx.begin(), idx.end(), 0);
    while (true) {
      double w = 1.0;
      for (int a = 0; a < n2; ++a) {
        uv[a] = gh.nodes[idx[a]];
        w *= gh.weights[idx[a]];
      }
      body(w);
      int a = 0;
      while (a < n2 && ++idx[a] == m) idx[a++] = 0;
      if (a == n2) break;
    }
  };

  // r in (s, mid]: centre on the first kernel.
  {
    const quad::Rule rr = quad::jacobi_left_on(time_nodes, -0.5 * alpha, s, mid);
    for (int i = 0; i < rr.size(); ++i) {
      const double r = rr.nodes[i];
      const double tau = r - s;
      const PhasePoint centre = flow(fm, s, r, x);
      const ScaleMatrix T(tau);
      tensor([&](double w) {
        const PhasePoint z = centre - T.apply_inverse(PhasePoint::stacked(uv));
        const double fv = std::abs(f(r, z));
        if (fv == 0.0) return;
        total += rr.weights[i] * w * fv * eta(pb, t - r, flow(fm, r, t, z) - y);
      });
    }
  }
  // r in [mid, t): centre on the second kernel, z = theta_{r,t}(y + w).
  {
    const quad::Rule rr = quad::jacobi_left_on(time_nodes, -0.5 * beta, 0.0, t - mid);
    for (int i = 0; i < rr.size(); ++i) {
      const double tau = rr.nodes[i];
      const double r = t - tau;
      const ScaleMatrix T(tau);
      const double jac = std::abs(flow_jacobian(fm, t, r, y).determinant());
      tensor([&](double w) {
        const PhasePoint z = flow(fm, t, r, y + T.apply_inverse(PhasePoint::stacked(uv)));
        const double fv = std::abs(f(r, z));
        if (fv == 0.0) return;
        total += rr.weights[i] * w * jac * fv * eta(pa, r - s, flow(fm, s, r, x) - z);
      });
    }
  }
  return total;
}

ConvolutionCheck convolution_inequality_check(const FlowMap& fm, double lambda, double alpha, double beta,
                                              const ScalarField& f, double s, const PhasePoint& x, double t,
                                              const PhasePoint& y, double c0, double C1, const KatoProvider& kato) {
  ConvolutionCheck out;
  out.lhs = convolution_lhs(fm, lambda, alpha, beta, f, s, x, t, y);
  out.kappa_used = convolution_kappa(c0);
  out.kato_value = kato(t - s, out.kappa_used * lambda);
  out.g_value = g_kernel({out.kappa_used * lambda, alpha, fm.dim()}, fm, s, x, t, y);
  out.rhs = C1 * out.kato_value * out.g_value;
  return out;
}

}  // namespace kinetic
