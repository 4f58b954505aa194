#include "kinetic/fitted.hpp"

#include <algorithm>
#include <cstdio>

#include "kinetic/errors.hpp"

namespace kinetic {

std::string FittedConstant::fingerprint() const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return name + "=" + buf + "@" + calibration.family + "/seed" + std::to_string(calibration.seed) + "/n" +
         std::to_string(calibration.sample_count);
}

FittedConstant fit_max_ratio(const std::string& name, const std::vector<double>& ratios, Calibration calibration) {
  if (ratios.empty()) throw ArgumentError("fit_max_ratio: empty calibration sample");
  calibration.sample_count = static_cast<long>(ratios.size());
  return {name, *std::max_element(ratios.begin(), ratios.end()), calibration};
}

FittedConstant fit_min_ratio(const std::string& name, const std::vector<double>& ratios, Calibration calibration) {
  if (ratios.empty()) throw ArgumentError("fit_min_ratio: empty calibration sample");
  calibration.sample_count = static_cast<long>(ratios.size());
  return {name, *std::min_element(ratios.begin(), ratios.end()), calibration};
}

void FittedConstants::add(const FittedConstant& c) { items_[c.name] = c; }

const FittedConstant& FittedConstants::get(const std::string& name) const {
  auto it = items_.find(name);
  if (it == items_.end()) throw ArgumentError("fitted constant not available: " + name);
  return it->second;
}

const FittedConstant& FittedConstants::use(const std::string& name, const std::string& test_family,
                                           uint64_t test_seed) const {
  const FittedConstant& c = get(name);
  if (c.calibration.family == test_family || c.calibration.seed == test_seed)
    throw PreconditionError("fitted constant " + name + " would be tested on its own calibration set");
  return c;
}

std::vector<std::string> FittedConstants::fingerprints() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : items_) out.push_back(v.fingerprint());
  return out;
}

}  // namespace kinetic
