#pragma once

#include <string>

#include "kinetic/montecarlo.hpp"

namespace kinetic {

// Little-endian 64-bit layout: header (magic, version, d, paths, steps, seed, flagged),
// then times, states (path-major), drift integrals.
void write_ensemble(const std::string& path, const PathEnsemble& ens);
PathEnsemble read_ensemble(const std::string& path);

// JSON description of a plan (drift family, diffusion kind, grid, seed).
std::string plan_json(const SimulationPlan& plan);
void write_plan_sidecar(const std::string& path, const SimulationPlan& plan);

}  // namespace kinetic
