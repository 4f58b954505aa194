#include "kinetic/cli/manifest.hpp"

#include <json.hpp>

namespace kinetic::cli {

bool RunManifest::all_passed() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

std::string RunManifest::emit() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["fingerprints"] = fingerprints;
  j["tool_version"] = tool_version;
  j["wall_time"] = wall_time;
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : checks) j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  j["artifacts"] = artifacts;
  j["all_passed"] = all_passed();
  return j.dump(2) + "\n";
}

RunManifest RunManifest::parse(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.seed = j.at("seed").get<uint64_t>();
  m.fingerprints = j.at("fingerprints").get<std::vector<std::string>>();
  m.tool_version = j.at("tool_version").get<std::string>();
  m.wall_time = j.at("wall_time").get<double>();
  for (const auto& c : j.at("checks"))
    m.checks.push_back({c.at("name").get<std::string>(), c.at("passed").get<bool>(), c.at("detail").get<std::string>()});
  m.artifacts = j.at("artifacts").get<std::vector<std::string>>();
  return m;
}

}  // namespace kinetic::cli
