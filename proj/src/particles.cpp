#include "kinetic/particles.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "kinetic/errors.hpp"
#include "kinetic/mollifier.hpp"
#include "kinetic/rng.hpp"

namespace kinetic {

void ParticleSystemPlan::validate() const {
  if (particles < 2) throw ArgumentError("ParticleSystemPlan: need at least two particles");
  if (d < 1 || d > 2) throw ArgumentError("ParticleSystemPlan: d must be 1 or 2");
  if (!(alpha >= 1.0 && alpha < 4.0 / 3.0)) throw DomainError("ParticleSystemPlan: alpha must lie in [1, 4/3)");
  if (static_cast<int>(gamma.size()) != particles) throw ArgumentError("ParticleSystemPlan: one gamma per particle");
  if (!(damping >= 0.0)) throw DomainError("ParticleSystemPlan: damping must be nonnegative");
  if (!(nu > 0.0)) throw DomainError("ParticleSystemPlan: nu must be positive");
  if (!(dt > 0.0) || !(horizon > 0.0)) throw DomainError("ParticleSystemPlan: dt and horizon must be positive");
  if (paths < 1) throw ArgumentError("ParticleSystemPlan: paths must be >= 1");
  if (record_every < 1) throw ArgumentError("ParticleSystemPlan: record_every must be >= 1");
  if (singular_mode.kind != SingularMode::Kind::exact && singular_mode.n < 1)
    throw ArgumentError("ParticleSystemPlan: mollifier/taming level must be >= 1");
}

ParticleEnsemble simulate_particles(const ParticleSystemPlan& plan) {
  plan.validate();
  const int N = plan.particles;
  const int d = plan.d;
  const int nd = N * d;
  const long K = std::lround(plan.horizon / plan.dt);
  const double dt = plan.dt;
  const double noise = std::sqrt(2.0 * plan.nu * dt);
  const double floor = 10.0 * std::sqrt(dt);
  const double alpha = plan.alpha;

  std::shared_ptr<const MollifiedPowerLaw> moll;
  if (plan.singular_mode.kind == SingularMode::Kind::mollified) {
    PowerLawDrift law;
    law.alpha = alpha;
    law.terms = {PowerLawTerm{1.0, {}}};
    moll = std::make_shared<const MollifiedPowerLaw>(law, plan.singular_mode.n, d);
  }
  const double tame_n = plan.singular_mode.n;
  const auto kind = plan.singular_mode.kind;

  // Pair kernel w |w|^{-alpha} under the chosen handling.
  auto pair = [&](const double* w, double* out) {
    double r2 = 0.0;
    for (int a = 0; a < d; ++a) r2 += w[a] * w[a];
    const double r = std::sqrt(r2);
    switch (kind) {
      case SingularMode::Kind::mollified:
        moll->kernel({w, static_cast<size_t>(d)}, {out, static_cast<size_t>(d)});
        return;
      case SingularMode::Kind::exact: {
        const double rr = std::max(r, floor);
        const double s = std::pow(rr, -alpha);
        for (int a = 0; a < d; ++a) out[a] = s * w[a];
        return;
      }
      case SingularMode::Kind::tamed: {
        const double rr = std::max(r, 1e-300);
        const double mag = std::pow(rr, 1.0 - alpha);
        const double s = std::pow(rr, -alpha) / (1.0 + mag / tame_n);
        for (int a = 0; a < d; ++a) out[a] = s * w[a];
        return;
      }
    }
  };

  ParticleEnsemble out;
  out.particles = N;
  out.d = d;
  std::vector<long> rec_steps;
  for (long k = 0; k <= K; k += plan.record_every) rec_steps.push_back(k);
  if (rec_steps.back() != K) rec_steps.push_back(K);
  for (long k : rec_steps) out.times.push_back(k * dt);
  const size_t R = rec_steps.size();

  std::vector<double> finals(static_cast<size_t>(plan.paths) * 2 * nd, 0.0);
  std::vector<double> min_dist(plan.paths, INFINITY);
  std::vector<double> energy(static_cast<size_t>(plan.paths) * R, 0.0);
  std::vector<double> vvar(static_cast<size_t>(plan.paths) * R, 0.0);
  std::vector<char> flags(plan.paths, 0);

#pragma omp parallel
  {
    rng::NormalStream normals(plan.seed, 0);
    std::vector<double> v(nd), x(nd), f(nd);
    double w[2], k[2];
#pragma omp for schedule(dynamic, 8)
    for (long p = 0; p < plan.paths; ++p) {
      normals = rng::NormalStream(plan.seed, static_cast<uint64_t>(p));
      for (int i = 0; i < N; ++i) {
        const double phi = 2.0 * M_PI * i / N;
        for (int a = 0; a < d; ++a) {
          v[i * d + a] = 0.0;
          x[i * d + a] = a == 0 ? plan.initial_radius * std::cos(phi) : a == 1 ? plan.initial_radius * std::sin(phi) : 0.0;
        }
      }
      double mind = INFINITY;
      size_t next = 0;
      for (long step = 0;; ++step) {
        std::fill(f.begin(), f.end(), 0.0);
        for (int i = 0; i < N; ++i)
          for (int j = i + 1; j < N; ++j) {
            double r2 = 0.0;
            for (int a = 0; a < d; ++a) {
              w[a] = x[i * d + a] - x[j * d + a];
              r2 += w[a] * w[a];
            }
            mind = std::min(mind, std::sqrt(r2));
            pair(w, k);
            // k is odd: the j-side sees -k.
            for (int a = 0; a < d; ++a) {
              f[i * d + a] += plan.gamma[j] * k[a];
              f[j * d + a] -= plan.gamma[i] * k[a];
            }
          }
        if (next < R && rec_steps[next] == step) {
          double e = 0.0;
          for (double vi : v) e += vi * vi;
          energy[p * R + next] = 0.5 * e;
          vvar[p * R + next] = e / nd;
          ++next;
        }
        if (step == K) break;
        for (int c = 0; c < nd; ++c) {
          const double vc = v[c];
          v[c] = vc + (f[c] - plan.damping * vc) * dt + noise * normals.at(static_cast<uint64_t>(step) * nd + c);
          x[c] += vc * dt;
        }
      }
      bool ok = std::isfinite(mind);
      for (int c = 0; c < nd && ok; ++c) ok = std::isfinite(v[c]) && std::isfinite(x[c]);
      flags[p] = !ok;
      min_dist[p] = mind;
      for (int c = 0; c < nd; ++c) {
        finals[p * 2 * nd + c] = v[c];
        finals[p * 2 * nd + nd + c] = x[c];
      }
    }
  }

  out.flagged = std::count(flags.begin(), flags.end(), 1);
  if (out.flagged > 0.01 * plan.paths)
    throw RunError("simulate_particles: " + std::to_string(out.flagged) +
                   " paths produced non-finite states; use a smaller dt or stronger mollification");
  out.kinetic_energy.assign(R, 0.0);
  out.velocity_variance.assign(R, 0.0);
  for (long p = 0; p < plan.paths; ++p) {
    if (flags[p]) continue;
    out.final_state.insert(out.final_state.end(), finals.begin() + p * 2 * nd, finals.begin() + (p + 1) * 2 * nd);
    out.min_distance.push_back(min_dist[p]);
    for (size_t r = 0; r < R; ++r) {
      out.kinetic_energy[r] += energy[p * R + r];
      out.velocity_variance[r] += vvar[p * R + r];
    }
  }
  out.paths = plan.paths - out.flagged;
  for (size_t r = 0; r < R; ++r) {
    out.kinetic_energy[r] /= out.paths;
    out.velocity_variance[r] /= out.paths;
  }
  return out;
}

}  // namespace kinetic
