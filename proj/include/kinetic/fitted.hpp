#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace kinetic {

struct Calibration {
  uint64_t seed = 0;
  std::string family;
  long sample_count = 0;
};

// An empirically fitted constant with the calibration it came from.
struct FittedConstant {
  std::string name;
  double value = 0.0;
  Calibration calibration;

  std::string fingerprint() const;
};

// Fits value = max ratio over the calibration sample.
FittedConstant fit_max_ratio(const std::string& name, const std::vector<double>& ratios, Calibration calibration);
// Fits value = min ratio over the calibration sample.
FittedConstant fit_min_ratio(const std::string& name, const std::vector<double>& ratios, Calibration calibration);

class FittedConstants {
 public:
  void add(const FittedConstant& c);
  bool has(const std::string& name) const { return items_.count(name) > 0; }
  const FittedConstant& get(const std::string& name) const;
  // Throws PreconditionError if `test_family` or `test_seed` collides with the calibration.
  const FittedConstant& use(const std::string& name, const std::string& test_family, uint64_t test_seed) const;
  std::vector<std::string> fingerprints() const;
  const std::map<std::string, FittedConstant>& items() const { return items_; }

 private:
  std::map<std::string, FittedConstant> items_;
};

}  // namespace kinetic
