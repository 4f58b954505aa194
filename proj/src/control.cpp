#include "kinetic/control.hpp"

#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "kinetic/errors.hpp"
#include "kinetic/rng.hpp"

namespace kinetic {

void ControlProblem::validate() const {
  if (!(t > s)) throw DomainError("ControlProblem: requires t > s");
  if (x.dim() != flow_map.dim() || y.dim() != flow_map.dim())
    throw ArgumentError("ControlProblem: endpoint dimension mismatch");
}

double ControlProblem::scaled_offset() const {
  const PhasePoint theta = flow(flow_map, s, t, x);
  return std::sqrt(ScaleMatrix(t - s).norm_sq(theta - y));
}

Eigen::MatrixXd gramian(const FlowMap& flow_map, double s, double t) {
  if (!flow_map.drift.regular_is_affine()) throw PreconditionError("gramian: b0 must be zero or linear");
  const int d = flow_map.dim();
  const int n = 2 * d;
  const double tau = t - s;
  if (tau < 0.0) throw DomainError("gramian: requires t >= s");
  if (tau == 0.0) return Eigen::MatrixXd::Zero(n, n);
  if (std::holds_alternative<ZeroDrift>(flow_map.drift.regular)) {
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd G(n, n);
    G << tau * I, 0.5 * tau * tau * I, 0.5 * tau * tau * I, (tau * tau * tau / 3.0) * I;
    return G;
  }
  // Van Loan: exp([[-A, Q], [0, A^T]] tau) = [[., F12], [0, F22]], G = F22^T F12.
  const Eigen::MatrixXd A = flow_map.generator();
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
  Q.topLeftCorner(d, d).setIdentity();
  Eigen::MatrixXd Mx = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  Mx.topLeftCorner(n, n) = -A;
  Mx.topRightCorner(n, n) = Q;
  Mx.bottomRightCorner(n, n) = A.transpose();
  const Eigen::MatrixXd E = (Mx * tau).exp();
  const Eigen::MatrixXd G = E.bottomRightCorner(n, n).transpose() * E.topRightCorner(n, n);
  return 0.5 * (G + G.transpose());
}

Eigen::MatrixXd gramian(const ControlProblem& p) { return gramian(p.flow_map, p.s, p.t); }

Eigen::VectorXd EnergySolution::control(double r) const {
  const int d = problem.flow_map.dim();
  const Eigen::MatrixXd Phi = problem.flow_map.transition(r, problem.t);
  return (Phi.transpose() * multiplier).head(d);
}

PhasePoint EnergySolution::state(double r) const {
  if (r <= problem.s) return problem.x;
  const PhasePoint theta = flow(problem.flow_map, problem.s, r, problem.x);
  const Eigen::MatrixXd Gr = gramian(problem.flow_map, problem.s, r);
  const Eigen::MatrixXd Phi = problem.flow_map.transition(r, problem.t);
  return PhasePoint::stacked(theta.vec() + Gr * Phi.transpose() * multiplier);
}

double EnergySolution::control_sup(int samples) const {
  double m = 0.0;
  for (int i = 0; i <= samples; ++i) {
    const double r = problem.s + (problem.t - problem.s) * i / samples;
    m = std::max(m, control(r).norm());
  }
  return m;
}

EnergySolution energy_solution(const ControlProblem& problem) {
  problem.validate();
  EnergySolution sol;
  sol.problem = problem;
  sol.G = gramian(problem);
  const PhasePoint theta = flow(problem.flow_map, problem.s, problem.t, problem.x);
  sol.offset = problem.y.vec() - theta.vec();
  Eigen::LLT<Eigen::MatrixXd> llt(sol.G);
  if (llt.info() != Eigen::Success) throw NumericalError("energy: Gramian is singular");
  sol.multiplier = llt.solve(sol.offset);
  sol.energy = std::sqrt(std::max(0.0, sol.offset.dot(sol.multiplier)));
  return sol;
}

double energy(const ControlProblem& problem) { return energy_solution(problem).energy; }

namespace {

void controlled_rhs(const FlowMap& fm, double r, const Eigen::VectorXd& z, const Eigen::VectorXd& u,
                    Eigen::VectorXd& out) {
  const int d = fm.dim();
  out.resize(2 * d);
  double b[16];
  fm.drift.regular_value(r, {z.data(), static_cast<size_t>(z.size())}, {b, static_cast<size_t>(d)});
  for (int i = 0; i < d; ++i) {
    out[i] = b[i] + u[i];
    out[d + i] = z[i];
  }
}

Eigen::VectorXd rk4_step(const FlowMap& fm, double r, double h, const Eigen::VectorXd& z, const Eigen::VectorXd& u) {
  Eigen::VectorXd k1, k2, k3, k4;
  controlled_rhs(fm, r, z, u, k1);
  controlled_rhs(fm, r + 0.5 * h, z + 0.5 * h * k1, u, k2);
  controlled_rhs(fm, r + 0.5 * h, z + 0.5 * h * k2, u, k3);
  controlled_rhs(fm, r + h, z + h * k3, u, k4);
  return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

PhasePoint integrate_controlled(const FlowMap& fm, double s, double t, const PhasePoint& x,
                                const std::function<Eigen::VectorXd(double)>& control, int steps) {
  if (steps < 1) throw ArgumentError("integrate_controlled: steps must be positive");
  const double h = (t - s) / steps;
  Eigen::VectorXd z = x.vec();
  // The control is continuous here, so RK4 samples it at the stage times.
  for (int k = 0; k < steps; ++k) {
    const double r = s + k * h;
    Eigen::VectorXd k1, k2, k3, k4;
    controlled_rhs(fm, r, z, control(r), k1);
    const Eigen::VectorXd um = control(r + 0.5 * h);
    controlled_rhs(fm, r + 0.5 * h, z + 0.5 * h * k1, um, k2);
    controlled_rhs(fm, r + 0.5 * h, z + 0.5 * h * k2, um, k3);
    controlled_rhs(fm, r + h, z + h * k3, control(r + h), k4);
    z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (!z.allFinite()) throw IntegrationError("integrate_controlled: non-finite state");
  return PhasePoint::stacked(z);
}

NumericEnergy energy_numeric(const ControlProblem& problem, int steps, int substeps, int max_iter, double tol) {
  problem.validate();
  if (steps < 1 || substeps < 1) throw ArgumentError("energy_numeric: steps must be positive");
  const FlowMap& fm = problem.flow_map;
  const int d = fm.dim();
  const int n2 = 2 * d;
  const int nu = steps * d;
  const double dt = (problem.t - problem.s) / steps;
  const double h = dt / substeps;

  auto shoot = [&](const Eigen::VectorXd& u) {
    Eigen::VectorXd z = problem.x.vec();
    for (int k = 0; k < steps; ++k) {
      const Eigen::VectorXd uk = u.segment(k * d, d);
      for (int j = 0; j < substeps; ++j) z = rk4_step(fm, problem.s + k * dt + j * h, h, z, uk);
    }
    return z;
  };

  NumericEnergy out;
  out.local = !fm.drift.regular_is_affine();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(nu);
  const Eigen::VectorXd target = problem.y.vec();
  const double scale = std::max(1.0, target.cwiseAbs().maxCoeff());
  Eigen::MatrixXd J(n2, nu);
  Eigen::VectorXd Y = shoot(u);
  for (int it = 0; it < max_iter; ++it) {
    out.residual = (Y - target).norm();
    if (out.residual <= tol * scale) break;
    const double eps = 1e-4;
    for (int c = 0; c < nu; ++c) {
      Eigen::VectorXd up = u, um = u;
      up[c] += eps;
      um[c] -= eps;
      J.col(c) = (shoot(up) - shoot(um)) / (2.0 * eps);
    }
    // Least-norm solution of the linearized constraint J u = target - Y + J u.
    const Eigen::VectorXd rhs = target - Y + J * u;
    const Eigen::MatrixXd JJt = J * J.transpose();
    Eigen::LLT<Eigen::MatrixXd> llt(JJt);
    if (llt.info() != Eigen::Success) throw NumericalError("energy_numeric: shooting Jacobian is rank deficient");
    u = J.transpose() * llt.solve(rhs);
    Y = shoot(u);
    out.iterations = it + 1;
  }
  out.residual = (Y - target).norm();
  if (!(out.residual <= std::max(tol * scale, 1e-8 * scale)))
    throw NumericalError("energy_numeric: terminal constraint not met (miss " + std::to_string(out.residual) + ")");
  out.energy = std::sqrt(dt * u.squaredNorm());
  for (int k = 0; k < steps; ++k) out.control.push_back(u.segment(k * d, d));
  return out;
}

ChainingPlan build_chain(const ControlProblem& problem, double c1, double c2) {
  const EnergySolution sol = energy_solution(problem);
  ChainingPlan plan;
  plan.scaled_offset = problem.scaled_offset();
  const double w2 = plan.scaled_offset * plan.scaled_offset;
  plan.M = std::max(1, static_cast<int>(std::ceil(w2 - 1e-12)));
  plan.delta = (problem.t - problem.s) / plan.M;
  plan.bound = 2.0 * c1 * c2 + 1.0;
  for (int j = 0; j <= plan.M; ++j) {
    const double tj = j == plan.M ? problem.t : problem.s + j * plan.delta;
    plan.times.push_back(tj);
    plan.nodes.push_back(j == 0 ? problem.x : j == plan.M ? problem.y : sol.state(tj));
  }
  const ScaleMatrix T(plan.delta);
  for (int j = 0; j < plan.M; ++j) {
    const PhasePoint th = flow(problem.flow_map, plan.times[j], plan.times[j + 1], plan.nodes[j]);
    const double v = std::sqrt(T.norm_sq(th - plan.nodes[j + 1]));
    plan.step_values.push_back(v);
    plan.slack.push_back(plan.bound - v);
    if (v > plan.bound)
      throw ConstructionError("build_chain: step " + std::to_string(j) + " exceeds 2 c1 c2 + 1", j);
  }
  return plan;
}

double tube_volume(int d, double delta) {
  return std::pow(M_PI, d) * std::pow(delta, 2.0 * d) / std::tgamma(d + 1.0);
}

double chain_threshold(double c0, double c1, double c2) { return 2.0 * c1 * c2 + 2.0 * c0 + 2.0; }

std::vector<ControlProblem> sample_problems(const FlowMap& fm, int count, uint64_t seed, double max_offset,
                                            double t_lo, double t_hi, double min_offset) {
  const int d = fm.dim();
  const int n2 = 2 * d;
  if (count < 0 || !(min_offset >= 0.0 && min_offset <= max_offset))
    throw ArgumentError("sample_problems: need count >= 0 and 0 <= min_offset <= max_offset");
  rng::UniformStream uni(seed, 0);
  rng::NormalStream nor(seed, 1);
  std::vector<ControlProblem> out;
  for (int i = 0; i < count; ++i) {
    ControlProblem p;
    p.flow_map = fm;
    p.s = 0.0;
    p.t = t_lo + (t_hi - t_lo) * uni.at(2 * i);
    p.x = PhasePoint(d);
    for (int a = 0; a < n2; ++a) p.x[a] = nor.at(static_cast<uint64_t>(i) * 2 * n2 + a);
    PhasePoint dir(d);
    for (int a = 0; a < n2; ++a) dir[a] = nor.at(static_cast<uint64_t>(i) * 2 * n2 + n2 + a);
    const double w = min_offset + (max_offset - min_offset) * uni.at(2 * i + 1);
    dir.vec() *= w / dir.vec().norm();
    const PhasePoint theta = flow(fm, p.s, p.t, p.x);
    p.y = theta - ScaleMatrix(p.t - p.s).apply_inverse(dir);
    out.push_back(p);
  }
  return out;
}

FittedConstant fit_energy_c1(const std::vector<ControlProblem>& problems, Calibration calibration) {
  std::vector<double> ratios;
  for (const auto& p : problems) {
    const double I = energy(p);
    const double w = p.scaled_offset();
    ratios.push_back(I / (w + 1.0));
    if (w > 1.0 && I > 0.0) ratios.push_back((w - 1.0) / I);
  }
  return fit_max_ratio("c1", ratios, calibration);
}

FittedConstant fit_control_c2(const std::vector<ControlProblem>& problems, Calibration calibration) {
  std::vector<double> ratios;
  for (const auto& p : problems) {
    const EnergySolution sol = energy_solution(p);
    ratios.push_back(sol.control_sup() * std::sqrt(p.t - p.s) / (p.scaled_offset() + 1.0));
  }
  return fit_max_ratio("c2", ratios, calibration);
}

bool energy_sandwich_holds(const ControlProblem& problem, double c1) {
  const double I = energy(problem);
  const double w = problem.scaled_offset();
  return (w - 1.0) / c1 <= I && I <= c1 * (w + 1.0);
}

}  // namespace kinetic
