#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kinetic::cli {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  bool operator==(const CheckResult&) const = default;
};

struct RunManifest {
  std::string command;
  std::string config_hash;  // hex FNV-1a of the resolved section and seed
  uint64_t seed = 0;
  std::vector<std::string> fingerprints;
  std::string tool_version;
  double wall_time = 0.0;  // seconds
  std::vector<CheckResult> checks;
  std::vector<std::string> artifacts;  // file names relative to the output directory

  bool all_passed() const;
  std::string emit() const;
  static RunManifest parse(const std::string& json);
  bool operator==(const RunManifest&) const = default;
};

}  // namespace kinetic::cli
