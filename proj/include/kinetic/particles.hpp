#pragma once

#include <cstdint>
#include <vector>

#include "kinetic/montecarlo.hpp"

namespace kinetic {

struct ParticleSystemPlan {
  int particles = 4;
  int d = 2;
  double alpha = 1.2;
  std::vector<double> gamma;  // coupling per particle
  double damping = 0.0;
  double nu = 1.0;
  double dt = 1e-4;
  double horizon = 1.0;
  long paths = 1000;
  uint64_t seed = 1;
  SingularMode singular_mode;
  double initial_radius = 1.0;  // particles start at rest on a circle (first two axes)
  int record_every = 100;

  void validate() const;
};

struct ParticleEnsemble {
  int particles = 0;
  int d = 0;
  long paths = 0;
  long flagged = 0;
  std::vector<double> final_state;  // per path: velocities (N d) then positions (N d)
  std::vector<double> min_distance; // per path, over the whole run
  std::vector<double> times;        // record times
  std::vector<double> kinetic_energy;    // mean over paths of sum_i |V_i|^2 / 2
  std::vector<double> velocity_variance; // mean over paths and axes of V^2
};

ParticleEnsemble simulate_particles(const ParticleSystemPlan& plan);

}  // namespace kinetic
