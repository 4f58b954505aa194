#include "kinetic/parametrix.hpp"

#include <cmath>

#include "kinetic/errors.hpp"
#include "kinetic/quadrature.hpp"
#include "kinetic/rng.hpp"
#include "blocked_sum.hpp"

namespace kinetic {

void ParametrixConfig::validate() const {
  if (order < 1) throw ArgumentError("parametrix: order must be >= 1");
  if (b1.d != base.dim()) throw ArgumentError("parametrix: b1 dimension mismatch");
  if (const auto* m = std::get_if<ImportanceMode>(&integrator)) {
    if (m->samples < 10000) throw ArgumentError("parametrix: importance sampling needs >= 1e4 samples");
  } else {
    const auto& q = std::get<QuadratureMode>(integrator);
    if (base.dim() != 1) throw ArgumentError("parametrix: quadrature mode is d = 1 only");
    if (q.time_nodes < 1 || q.space_nodes < 1) throw ArgumentError("parametrix: node counts must be positive");
  }
}

namespace {

double drift_dot(const VectorField& b1, double r, const Eigen::VectorXd& z, const double* l, int d) {
  double bv[16];
  b1(r, {z.data(), static_cast<size_t>(z.size())}, {bv, static_cast<size_t>(d)});
  double acc = 0.0;
  for (int c = 0; c < d; ++c) acc += bv[c] * l[c];
  return acc;
}

}  // namespace

double h_kernel(const ParametrixConfig& cfg, double r, const PhasePoint& z, double t, const PhasePoint& y) {
  if (!(r < t)) throw DomainError("h_kernel: requires r < t");
  const GaussianStep g = cfg.base.step(r, t);
  const Eigen::VectorXd grad = g.density_grad_x1(z.vec(), y.vec());
  return drift_dot(cfg.b1, r, z.vec(), grad.data(), g.d);
}

Bridge gaussian_bridge(const GaussianTransition& base, double s, const PhasePoint& x, double r, double t,
                       const PhasePoint& y) {
  if (!(s < r && r < t)) throw DomainError("gaussian_bridge: requires s < r < t");
  const GaussianStep a = base.step(s, r);
  const GaussianStep b = base.step(r, t);
  const Eigen::VectorXd m = a.mean(x.vec());
  const Eigen::MatrixXd PC = b.Phi * a.C;
  const Eigen::MatrixXd S = PC * b.Phi.transpose() + b.C;
  Eigen::LLT<Eigen::MatrixXd> sl(S);
  if (sl.info() != Eigen::Success) throw NumericalError("gaussian_bridge: singular endpoint covariance");
  // K = C_a Phi^T S^{-1}
  const Eigen::MatrixXd K = sl.solve(PC).transpose();
  Bridge br;
  br.mean = m + K * (y.vec() - b.mean(m));
  Eigen::MatrixXd cov = a.C - K * PC;
  cov = 0.5 * (cov + cov.transpose());
  Eigen::LLT<Eigen::MatrixXd> cl(cov);
  if (cl.info() != Eigen::Success) {
    // Near r = s or r = t the bridge is almost degenerate; add a relative jitter.
    const double jitter = 1e-14 * std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
    cl.compute(cov + jitter * Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
    if (cl.info() != Eigen::Success) throw NumericalError("gaussian_bridge: covariance not positive definite");
  }
  br.chol = cl.matrixL();
  return br;
}

namespace {

// Draws from the bridge law of X_r given X_s = x, X_t = y, returning Z and the
// whitened residual v = L_b^{-1}(y - mean_b(Z)) of the last step. Near r = t the
// residual is sampled directly: the state-form covariance cancels there.
class BridgeSampler {
 public:
  BridgeSampler(const GaussianTransition& base, double s, const Eigen::VectorXd& x, double r, double t,
                const Eigen::VectorXd& y)
      : step_(base.step(r, t)), y_(y) {
    const GaussianStep a = base.step(s, r);
    residual_form_ = (t - r) < (r - s);
    const Eigen::VectorXd ma = a.mean(x);
    const Eigen::MatrixXd S = step_.Phi * a.C * step_.Phi.transpose() + step_.C;
    Eigen::LLT<Eigen::MatrixXd> sl(S);
    if (sl.info() != Eigen::Success) throw NumericalError("bridge: singular endpoint covariance");
    Eigen::MatrixXd cov;
    if (residual_form_) {
      const Eigen::VectorXd D = y - step_.mean(ma);
      mean_ = step_.L.transpose() * sl.solve(D);
      cov = Eigen::MatrixXd::Identity(S.rows(), S.cols()) - step_.L.transpose() * sl.solve(step_.L);
      phi_inv_ = step_.Phi.inverse();
    } else {
      const Eigen::MatrixXd PC = step_.Phi * a.C;
      const Eigen::MatrixXd K = sl.solve(PC).transpose();
      mean_ = ma + K * (y - step_.mean(ma));
      cov = a.C - K * PC;
    }
    cov = 0.5 * (cov + cov.transpose());
    Eigen::LLT<Eigen::MatrixXd> cl(cov);
    if (cl.info() != Eigen::Success) {
      const double jitter = 1e-14 * std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
      cl.compute(cov + jitter * Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
      if (cl.info() != Eigen::Success) throw NumericalError("bridge: covariance not positive definite");
    }
    chol_ = cl.matrixL();
  }

  const GaussianStep& step() const { return step_; }

  void draw(const Eigen::VectorXd& xi, Eigen::VectorXd& z, Eigen::VectorXd& v) const {
    if (residual_form_) {
      v = mean_ + chol_ * xi;
      z = phi_inv_ * (y_ - step_.shift - step_.L * v);
    } else {
      z = mean_ + chol_ * xi;
      v = step_.L.triangularView<Eigen::Lower>().solve(y_ - step_.mean(z));
    }
  }

 private:
  GaussianStep step_;
  Eigen::VectorXd y_;
  bool residual_form_ = false;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd chol_;
  Eigen::MatrixXd phi_inv_;
};

// b1(r, z) . grad_map v
double weighted_drift(const VectorField& b1, const GaussianStep& g, double r, const Eigen::VectorXd& z,
                      const Eigen::VectorXd& v) {
  const Eigen::VectorXd l = g.grad_map * v;
  return drift_dot(b1, r, z, l.data(), g.d);
}

}  // namespace

namespace {

// ratio(r, z) = (lhs (x) ...)(s, x; r, z) / p0(s, x; r, z).
using RatioFn = std::function<double(double r, const Eigen::VectorXd& z)>;

struct Moments {
  double mean = 0.0;
  double std_error = 0.0;
};

// int_s^t E_bridge[ratio(r, Z) b1(r, Z) . grad log p0(r, Z; t, y)] dr by tensor quadrature.
double bridge_quadrature(const ParametrixConfig& cfg, const QuadratureMode& q, const RatioFn& ratio, double s,
                         const PhasePoint& x, double t, const PhasePoint& y) {
  const int d = cfg.base.dim();
  const int n2 = 2 * d;
  const quad::Rule wq = quad::legendre_on(q.time_nodes, 0.0, std::sqrt(t - s));
  const quad::Rule& gh = quad::gauss_hermite(q.space_nodes);
  const double norm = std::pow(M_PI, -0.5 * n2);
  double total = 0.0;
  std::vector<int> idx(n2);
  Eigen::VectorXd u(n2);
  for (int j = 0; j < wq.size(); ++j) {
    const double w = wq.nodes[j];
    const double r = t - w * w;
    if (!(r > s)) continue;
    const BridgeSampler br(cfg.base, s, x.vec(), r, t, y.vec());
    Eigen::VectorXd z, v;
    double acc = 0.0;
    std::fill(idx.begin(), idx.end(), 0);
    while (true) {
      double wt = norm;
      for (int a = 0; a < n2; ++a) {
        u[a] = std::sqrt(2.0) * gh.nodes[idx[a]];
        wt *= gh.weights[idx[a]];
      }
      br.draw(u, z, v);
      const double h = weighted_drift(cfg.b1, br.step(), r, z, v);
      if (h != 0.0) acc += wt * ratio(r, z) * h;
      int a = 0;
      while (a < n2 && ++idx[a] == q.space_nodes) idx[a++] = 0;
      if (a == n2) break;
    }
    if (!std::isfinite(acc))
      throw IntegrationError("parametrix: non-finite bridge quadrature at r = " + std::to_string(r));
    total += 2.0 * w * wq.weights[j] * acc;
  }
  return total;
}

// Sample chain estimator of rho_order(s, x; t, y) with `first` applied to the innermost point.
Moments bridge_chain_mc(const ParametrixConfig& cfg, const ImportanceMode& m, int order, uint64_t stream,
                        const RatioFn* first, double s, const PhasePoint& x, double t, const PhasePoint& y) {
  const int d = cfg.base.dim();
  const int n2 = 2 * d;
  const long N = m.samples;
  const auto [sum, sumsq] = detail::blocked_sum2(N, [&](long i) {
    rng::NormalStream normals(m.seed, 2 * stream);
    rng::UniformStream uniforms(m.seed, 2 * stream + 1);
    Eigen::VectorXd xi(n2), z, v;
    double weight = 1.0;
    double cur_t = t;
    Eigen::VectorXd cur_y = y.vec();
    for (int k = 0; k < order && weight != 0.0; ++k) {
      const double span = std::sqrt(cur_t - s);
      const double w = uniforms.at(static_cast<uint64_t>(i) * order + k) * span;
      const double r = cur_t - w * w;
      if (!(r > s)) {
        weight = 0.0;
        break;
      }
      const BridgeSampler br(cfg.base, s, x.vec(), r, cur_t, cur_y);
      for (int a = 0; a < n2; ++a) xi[a] = normals.at((static_cast<uint64_t>(i) * order + k) * n2 + a);
      br.draw(xi, z, v);
      weight *= 2.0 * w * span * weighted_drift(cfg.b1, br.step(), r, z, v);
      if (k + 1 == order && first) weight *= (*first)(r, z);
      cur_t = r;
      cur_y = z;
    }
    return weight;
  });
  if (!std::isfinite(sum) || !std::isfinite(sumsq))
    throw RunError("parametrix: importance weights have non-finite variance; mollify or tame b1");
  Moments out;
  out.mean = sum / N;
  const double var = std::max(0.0, sumsq / N - out.mean * out.mean);
  out.std_error = std::sqrt(var / (N - 1));
  return out;
}

// Nested quadrature for rho_order; cost grows like nodes^order.
double rho_quadrature(const ParametrixConfig& cfg, const QuadratureMode& q, int order, double s,
                      const PhasePoint& x, double t, const PhasePoint& y) {
  if (order == 0) return 1.0;
  const RatioFn inner = [&](double r, const Eigen::VectorXd& z) {
    return rho_quadrature(cfg, q, order - 1, s, x, r, PhasePoint::stacked(z));
  };
  return bridge_quadrature(cfg, q, inner, s, x, t, y);
}

}  // namespace

KernelEstimate convolve_once(const ParametrixConfig& cfg, const KernelFn& lhs, double s, const PhasePoint& x,
                             double t, const PhasePoint& y) {
  cfg.validate();
  if (!(s < t)) throw DomainError("convolve_once: requires s < t");
  const double p0 = cfg.base.density(s, x, t, y);
  const RatioFn ratio = [&](double r, const Eigen::VectorXd& z) {
    const PhasePoint zp = PhasePoint::stacked(z);
    const double base = cfg.base.density(s, x, r, zp);
    return base > 0.0 ? lhs(s, x, r, zp) / base : 0.0;
  };
  KernelEstimate est;
  if (const auto* q = std::get_if<QuadratureMode>(&cfg.integrator)) {
    est.value = p0 * bridge_quadrature(cfg, *q, ratio, s, x, t, y);
  } else {
    const Moments mo = bridge_chain_mc(cfg, std::get<ImportanceMode>(cfg.integrator), 1, 1, &ratio, s, x, t, y);
    est.value = p0 * mo.mean;
    est.std_error = p0 * mo.std_error;
  }
  est.terms = {est.value};
  est.term_errors = {est.std_error};
  return est;
}

KernelEstimate parametrix_series(const ParametrixConfig& cfg, double s, const PhasePoint& x, double t,
                                 const PhasePoint& y) {
  cfg.validate();
  if (!(s < t)) throw DomainError("parametrix_series: requires s < t");
  const double p0 = cfg.base.density(s, x, t, y);
  KernelEstimate est;
  est.terms.push_back(p0);
  est.term_errors.push_back(0.0);
  if (const auto* q = std::get_if<QuadratureMode>(&cfg.integrator)) {
    const double per_level = q->time_nodes * std::pow(q->space_nodes, 2 * cfg.base.dim());
    if (std::pow(per_level, cfg.order) > 2e9)
      throw ArgumentError("parametrix: nested quadrature too expensive at this order; use importance mode");
    for (int j = 1; j <= cfg.order; ++j) {
      est.terms.push_back(p0 * rho_quadrature(cfg, *q, j, s, x, t, y));
      est.term_errors.push_back(0.0);
    }
  } else {
    const auto& m = std::get<ImportanceMode>(cfg.integrator);
    for (int j = 1; j <= cfg.order; ++j) {
      const Moments mo = bridge_chain_mc(cfg, m, j, 16 + j, nullptr, s, x, t, y);
      est.terms.push_back(p0 * mo.mean);
      est.term_errors.push_back(p0 * mo.std_error);
    }
  }
  double var = 0.0;
  for (size_t j = 0; j < est.terms.size(); ++j) {
    est.value += est.terms[j];
    var += est.term_errors[j] * est.term_errors[j];
  }
  est.std_error = std::sqrt(var);
  for (size_t j = 2; j < est.terms.size(); ++j)
    if (std::abs(est.terms[j]) > std::abs(est.terms[j - 1]) + 2.0 * (est.term_errors[j] + est.term_errors[j - 1]))
      est.divergence = true;
  if (cfg.kato_lambda) {
    est.lambda_estimate = kato_of_drift(cfg.b1, *cfg.kato_lambda, t - s, 1.0);
    for (int j = 1; j <= cfg.order; ++j) est.lambda_ladder.push_back(std::pow(cfg.kappa, j - 1) * *cfg.kato_lambda);
  }
  return est;
}

}  // namespace kinetic
