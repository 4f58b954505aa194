#include "kinetic/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "kinetic/errors.hpp"
#include "kinetic/mollifier.hpp"
#include "kinetic/rng.hpp"
#include "blocked_sum.hpp"

namespace kinetic {

VectorField effective_singular(const DriftSpec& drift, const SingularMode& mode) {
  if (!drift.has_singular()) return VectorField::zero(drift.d);
  switch (mode.kind) {
    case SingularMode::Kind::exact:
      return drift.singular_field();
    case SingularMode::Kind::tamed:
      return tame(drift.singular_field(), mode.n);
    case SingularMode::Kind::mollified:
      if (const auto* pl = std::get_if<PowerLawDrift>(&drift.singular); pl && drift.d <= 2)
        return MollifiedPowerLaw(*pl, mode.n, drift.d).field();
      return Mollifier(mode.n, drift.d).apply(drift.singular_field());
  }
  throw ArgumentError("effective_singular: unknown mode");
}

long SimulationPlan::steps() const { return std::lround(horizon / dt); }

void SimulationPlan::validate() const {
  drift.validate();
  diffusion.validate();
  if (diffusion.d != drift.d) throw ArgumentError("SimulationPlan: drift and diffusion dimensions differ");
  if (x0.dim() != drift.d) throw ArgumentError("SimulationPlan: x0 has the wrong dimension");
  if (!(dt > 0.0)) throw DomainError("SimulationPlan: dt must be positive");
  if (!(horizon > 0.0)) throw DomainError("SimulationPlan: horizon must be positive");
  if (std::abs(steps() * dt - horizon) > 1e-9 * horizon)
    throw ArgumentError("SimulationPlan: horizon must be a multiple of dt");
  if (paths < 1) throw ArgumentError("SimulationPlan: paths must be >= 1");
  if (!(dt * drift.kappa1 < 0.5)) throw PreconditionError("SimulationPlan: dt * kappa1 must be < 0.5");
  if (singular_mode.kind != SingularMode::Kind::exact && singular_mode.n < 1)
    throw ArgumentError("SimulationPlan: mollifier/taming level must be >= 1");
}

// ---- ControlPath ----------------------------------------------------------

double ControlPath::energy() const {
  double e = 0.0;
  for (size_t k = 0; k + 1 < knots.size(); ++k) e += h_dot[k].squaredNorm() * (knots[k + 1] - knots[k]);
  return e;
}

Eigen::VectorXd ControlPath::at(double t) const {
  if (t <= knots.front()) return h_dot.front();
  if (t >= knots.back()) return h_dot.back();
  const size_t k = std::upper_bound(knots.begin(), knots.end(), t) - knots.begin() - 1;
  return h_dot[std::min(k, h_dot.size() - 1)];
}

void ControlPath::validate(int d) const {
  if (knots.size() < 2 || h_dot.size() != knots.size() - 1)
    throw ArgumentError("ControlPath: need K + 1 knots and K values");
  for (size_t k = 0; k + 1 < knots.size(); ++k)
    if (!(knots[k + 1] > knots[k])) throw ArgumentError("ControlPath: knots must increase");
  for (const auto& v : h_dot)
    if (v.size() != d) throw ArgumentError("ControlPath: value dimension mismatch");
  if (budget >= 0.0 && energy() > budget * (1 + 1e-12)) throw PreconditionError("ControlPath: energy exceeds budget");
}

ControlPath ControlPath::constant(double s, double t, const Eigen::VectorXd& value) {
  ControlPath c;
  c.knots = {s, t};
  c.h_dot = {value};
  return c;
}

// ---- PathEnsemble -----------------------------------------------------------

PathEnsemble::PathEnsemble(int d, std::vector<double> times, long paths, uint64_t seed)
    : d_(d), times_(std::move(times)), paths_(paths), seed_(seed) {
  states_.assign(static_cast<size_t>(paths) * times_.size() * 2 * d, 0.0);
  drift_integral_.assign(paths, 0.0);
}

size_t PathEnsemble::time_index(double t) const {
  size_t best = 0;
  for (size_t i = 1; i < times_.size(); ++i)
    if (std::abs(times_[i] - t) < std::abs(times_[best] - t)) best = i;
  if (times_.empty() || std::abs(times_[best] - t) > 1e-9 * std::max(1.0, std::abs(t)))
    throw ArgumentError("PathEnsemble: time not on the recorded grid");
  return best;
}

void PathEnsemble::compact(const std::vector<char>& flags) {
  const size_t block = times_.size() * 2 * d_;
  long out = 0;
  for (long p = 0; p < paths_; ++p) {
    if (flags[p]) continue;
    if (out != p) {
      std::copy_n(states_.begin() + p * block, block, states_.begin() + out * block);
      drift_integral_[out] = drift_integral_[p];
    }
    ++out;
  }
  flagged_ += paths_ - out;
  paths_ = out;
  states_.resize(static_cast<size_t>(out) * block);
  drift_integral_.resize(out);
}

// ---- simulation -------------------------------------------------------------

namespace {

struct RecordPlan {
  std::vector<double> times;
  std::vector<long> steps;  // step index per record, increasing
};

RecordPlan record_plan(const SimulationPlan& plan) {
  RecordPlan r;
  const long K = plan.steps();
  if (plan.record_every > 0) {
    for (long k = 0; k <= K; k += plan.record_every) r.steps.push_back(k);
    if (r.steps.back() != K) r.steps.push_back(K);
  } else if (plan.record_times.empty()) {
    r.steps.push_back(K);
  } else {
    for (double t : plan.record_times) {
      const double u = (t - plan.s0) / plan.dt;
      const long k = std::lround(u);
      if (k < 0 || k > K || std::abs(u - k) > 1e-6) throw ArgumentError("SimulationPlan: record time off the step grid");
      r.steps.push_back(k);
    }
    std::sort(r.steps.begin(), r.steps.end());
    r.steps.erase(std::unique(r.steps.begin(), r.steps.end()), r.steps.end());
  }
  for (long k : r.steps) r.times.push_back(plan.s0 + k * plan.dt);
  return r;
}

PathEnsemble run(const SimulationPlan& plan, const ControlPath* control) {
  plan.validate();
  if (control) control->validate(plan.drift.d);
  const int d = plan.drift.d;
  const int n2 = 2 * d;
  const long K = plan.steps();
  const double dt = plan.dt;
  const double sq = std::sqrt(2.0 * dt);
  const RecordPlan rec = record_plan(plan);
  PathEnsemble ens(d, rec.times, plan.paths, plan.seed);

  const bool has_regular = !std::holds_alternative<ZeroDrift>(plan.drift.regular);
  const bool has_singular = plan.drift.has_singular();
  const VectorField b1 = has_singular ? effective_singular(plan.drift, plan.singular_mode) : VectorField::zero(d);
  const bool identity = plan.diffusion.kind == DiffusionSpec::Kind::identity;
  const bool holder = plan.diffusion.kind == DiffusionSpec::Kind::holder;
  const Eigen::MatrixXd sigma_c = holder ? Eigen::MatrixXd() : plan.diffusion.constant_matrix();
  std::vector<Eigen::VectorXd> controls;
  if (control) {
    controls.reserve(K);
    for (long k = 0; k < K; ++k) controls.push_back(control->at(plan.s0 + k * dt));
  }

  std::vector<char> flags(plan.paths, 0);
#pragma omp parallel
  {
    rng::NormalStream normals(plan.seed, 0);
    double x[32], b[16], bs[16], xi[16], noise[16];
#pragma omp for schedule(dynamic, 256)
    for (long p = 0; p < plan.paths; ++p) {
      normals = rng::NormalStream(plan.seed, static_cast<uint64_t>(p));
      for (int a = 0; a < n2; ++a) x[a] = plan.x0[a];
      size_t next = 0;
      double integral = 0.0;
      for (long k = 0;; ++k) {
        const double t = plan.s0 + k * dt;
        while (next < rec.steps.size() && rec.steps[next] == k) {
          auto st = ens.state(p, next);
          for (int a = 0; a < n2; ++a) st[a] = x[a];
          ++next;
        }
        double bmag = 0.0;
        if (has_singular) {
          b1(t, {x, static_cast<size_t>(n2)}, {bs, static_cast<size_t>(d)});
          for (int i = 0; i < d; ++i) bmag += bs[i] * bs[i];
          bmag = std::sqrt(bmag);
          integral += (k == 0 || k == K ? 0.5 : 1.0) * dt * bmag;
        }
        if (k == K) break;
        for (int i = 0; i < d; ++i) b[i] = has_singular ? bs[i] : 0.0;
        if (has_regular) {
          double br[16];
          plan.drift.regular_value(t, {x, static_cast<size_t>(n2)}, {br, static_cast<size_t>(d)});
          for (int i = 0; i < d; ++i) b[i] += br[i];
        }
        if (control)
          for (int i = 0; i < d; ++i) b[i] += controls[k][i];
        for (int i = 0; i < d; ++i) xi[i] = normals.at(static_cast<uint64_t>(k) * d + i);
        if (identity) {
          for (int i = 0; i < d; ++i) noise[i] = sq * xi[i];
        } else {
          const Eigen::MatrixXd s = holder ? plan.diffusion.at(t, {x, static_cast<size_t>(n2)}) : sigma_c;
          for (int i = 0; i < d; ++i) {
            double acc = 0.0;
            for (int j = 0; j < d; ++j) acc += s(i, j) * xi[j];
            noise[i] = sq * acc;
          }
        }
        // Position uses the pre-update velocity.
        for (int i = 0; i < d; ++i) {
          const double v = x[i];
          x[i] = v + b[i] * dt + noise[i];
          x[d + i] += v * dt;
        }
      }
      bool ok = std::isfinite(integral);
      for (int a = 0; a < n2 && ok; ++a) ok = std::isfinite(x[a]);
      for (size_t r = 0; r < rec.steps.size() && ok; ++r)
        for (double v : ens.state(p, r)) ok = ok && std::isfinite(v);
      flags[p] = !ok;
      ens.drift_integral(p) = integral;
    }
  }
  const long flagged = std::count(flags.begin(), flags.end(), 1);
  if (flagged > 0.01 * plan.paths)
    throw RunError("simulate: " + std::to_string(flagged) + " of " + std::to_string(plan.paths) +
                   " paths produced non-finite states; reduce dt or mollify the drift");
  if (flagged > 0) ens.compact(flags);
  return ens;
}

}  // namespace

PathEnsemble simulate(const SimulationPlan& plan) { return run(plan, nullptr); }

PathEnsemble simulate_controlled(const SimulationPlan& plan, const ControlPath& control) {
  return run(plan, &control);
}

Moments2 sample_moments(const PathEnsemble& ens, size_t ti) {
  const int n2 = 2 * ens.dim();
  const long M = ens.paths();
  if (M < 2) throw ArgumentError("sample_moments: need at least two paths");
  Moments2 m;
  m.mean = Eigen::VectorXd::Zero(n2);
  for (long p = 0; p < M; ++p) {
    auto s = ens.state(p, ti);
    for (int a = 0; a < n2; ++a) m.mean[a] += s[a];
  }
  m.mean /= M;
  // Second and fourth central moments for the standard error of each entry.
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(n2, n2), s4 = Eigen::MatrixXd::Zero(n2, n2);
  Eigen::VectorXd c(n2);
  for (long p = 0; p < M; ++p) {
    auto s = ens.state(p, ti);
    for (int a = 0; a < n2; ++a) c[a] = s[a] - m.mean[a];
    for (int a = 0; a < n2; ++a)
      for (int b = 0; b < n2; ++b) {
        const double v = c[a] * c[b];
        s2(a, b) += v;
        s4(a, b) += v * v;
      }
  }
  m.cov = s2 / (M - 1);
  m.cov_std_error = Eigen::MatrixXd(n2, n2);
  for (int a = 0; a < n2; ++a)
    for (int b = 0; b < n2; ++b) {
      const double mu = s2(a, b) / M;
      const double var = std::max(0.0, s4(a, b) / M - mu * mu);
      m.cov_std_error(a, b) = std::sqrt(var / M);
    }
  return m;
}

KrylovResult krylov_estimate(const PathEnsemble& ens, const ScalarField& f, double t, KatoQuery query) {
  const auto& times = ens.times();
  if (times.size() < 2) throw ArgumentError("krylov_estimate: ensemble must record a time grid");
  const size_t last = ens.time_index(times.front() + t);
  const long M = ens.paths();
  const auto [sum, sumsq] = detail::blocked_sum2(M, [&](long p) {
    double acc = 0.0;
    double prev = f(times[0], ens.state(p, 0));
    for (size_t i = 1; i <= last; ++i) {
      const double cur = f(times[i], ens.state(p, i));
      acc += 0.5 * (times[i] - times[i - 1]) * (prev + cur);
      prev = cur;
    }
    return acc;
  });
  KrylovResult r;
  r.mc_value = sum / M;
  r.mc_std_error = M > 1 ? std::sqrt(std::max(0.0, sumsq / M - r.mc_value * r.mc_value) / (M - 1)) : 0.0;
  query.f = f;
  query.beta = 1.0;
  query.delta = t;
  r.kato_value = kato_functional(query).value;
  r.ratio = r.mc_value / r.kato_value;
  return r;
}

}  // namespace kinetic
