#include "kinetic/ensemble_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "kinetic/errors.hpp"

namespace kinetic {
namespace {

constexpr uint64_t kMagic = 0x31534e454e494b00ULL;  // "\0KINENS1"
constexpr uint64_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "ensemble files assume a little-endian host");

void put_u64(std::ofstream& out, uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64(std::ofstream& out, const double* v, size_t n) {
  out.write(reinterpret_cast<const char*>(v), static_cast<std::streamsize>(8 * n));
}
uint64_t get_u64(std::ifstream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
void get_f64(std::ifstream& in, double* v, size_t n) {
  in.read(reinterpret_cast<char*>(v), static_cast<std::streamsize>(8 * n));
}

}  // namespace

void write_ensemble(const std::string& path, const PathEnsemble& ens) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("write_ensemble: cannot open " + path);
  put_u64(out, kMagic);
  put_u64(out, kVersion);
  put_u64(out, static_cast<uint64_t>(ens.dim()));
  put_u64(out, static_cast<uint64_t>(ens.paths()));
  put_u64(out, ens.times().size());
  put_u64(out, ens.seed());
  put_u64(out, static_cast<uint64_t>(ens.flagged()));
  put_f64(out, ens.times().data(), ens.times().size());
  put_f64(out, ens.raw_states().data(), ens.raw_states().size());
  put_f64(out, ens.raw_drift_integral().data(), ens.raw_drift_integral().size());
  if (!out) throw ArgumentError("write_ensemble: write failed for " + path);
}

PathEnsemble read_ensemble(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("read_ensemble: cannot open " + path);
  if (get_u64(in) != kMagic) throw ArgumentError("read_ensemble: bad magic in " + path);
  if (get_u64(in) != kVersion) throw ArgumentError("read_ensemble: unsupported version in " + path);
  const int d = static_cast<int>(get_u64(in));
  const long paths = static_cast<long>(get_u64(in));
  const size_t steps = get_u64(in);
  const uint64_t seed = get_u64(in);
  const long flagged = static_cast<long>(get_u64(in));
  if (!in || d < 1 || d > 64) throw ArgumentError("read_ensemble: corrupt header in " + path);
  std::vector<double> times(steps);
  get_f64(in, times.data(), steps);
  // Reconstruct with the flagged count by compacting a padded ensemble.
  PathEnsemble ens(d, times, paths + flagged, seed);
  std::vector<char> flags(paths + flagged, 0);
  for (long p = paths; p < paths + flagged; ++p) flags[p] = 1;
  get_f64(in, ens.raw_states().data(), static_cast<size_t>(paths) * steps * 2 * d);
  get_f64(in, ens.raw_drift_integral().data(), paths);
  if (!in) throw ArgumentError("read_ensemble: truncated file " + path);
  ens.compact(flags);
  return ens;
}

std::string plan_json(const SimulationPlan& plan) {
  nlohmann::ordered_json j;
  j["d"] = plan.drift.d;
  const char* regular = std::holds_alternative<ZeroDrift>(plan.drift.regular)     ? "zero"
                        : std::holds_alternative<LinearDrift>(plan.drift.regular) ? "linear"
                                                                                    : "callable";
  j["regular"] = regular;
  if (const auto* pl = std::get_if<PowerLawDrift>(&plan.drift.singular)) {
    j["singular"] = "power_law";
    j["alpha"] = pl->alpha;
    nlohmann::ordered_json terms = nlohmann::ordered_json::array();
    for (const auto& t : pl->terms) {
      std::vector<double> c(t.center.data(), t.center.data() + t.center.size());
      terms.push_back({{"gamma", t.gamma}, {"center", c}});
    }
    j["terms"] = terms;
  } else {
    j["singular"] = plan.drift.has_singular() ? "other" : "none";
  }
  j["diffusion"] = plan.diffusion.kind == DiffusionSpec::Kind::identity   ? "identity"
                   : plan.diffusion.kind == DiffusionSpec::Kind::constant ? "constant"
                                                                          : "holder";
  j["x0"] = std::vector<double>(plan.x0.vec().data(), plan.x0.vec().data() + plan.x0.vec().size());
  j["s0"] = plan.s0;
  j["horizon"] = plan.horizon;
  j["dt"] = plan.dt;
  j["paths"] = plan.paths;
  j["seed"] = plan.seed;
  const char* mode = plan.singular_mode.kind == SingularMode::Kind::mollified ? "mollified"
                     : plan.singular_mode.kind == SingularMode::Kind::tamed   ? "tamed"
                                                                              : "exact";
  j["singular_mode"] = mode;
  j["mode_level"] = plan.singular_mode.n;
  return j.dump(2);
}

void write_plan_sidecar(const std::string& path, const SimulationPlan& plan) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("write_plan_sidecar: cannot open " + path);
  out << plan_json(plan) << '\n';
}

}  // namespace kinetic
