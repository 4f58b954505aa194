#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kinetic/cli/config.hpp"
#include "kinetic/fields.hpp"

namespace kinetic::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunOptions {
  std::string command;
  std::optional<std::string> config_path;
  std::optional<std::string> config_text;  // in-memory alternative to config_path
  std::optional<uint64_t> seed;
  std::optional<std::string> out_dir;
  int threads = 0;  // 0 = library default
};

const Schema& schema();
std::vector<std::string> command_names();

// Runs one subcommand. Exit status: 0 all checks pass, 1 computation error or
// failed check, 2 schema error. Errors are reported as JSON on `err`.
int run(const RunOptions& options, std::ostream& err);

// argv front end.
int main_entry(int argc, char** argv);

// Nonnegative test fields for the Krylov estimate, d = 1: calibration and a disjoint test family.
std::vector<ScalarField> krylov_family(bool calibration);

}  // namespace kinetic::cli
