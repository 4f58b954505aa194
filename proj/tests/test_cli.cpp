#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kinetic/cli/commands.hpp"
#include "kinetic/cli/config.hpp"
#include "kinetic/cli/csv.hpp"
#include "kinetic/cli/manifest.hpp"

using namespace kinetic::cli;
namespace fs = std::filesystem;

namespace {

const Schema& tiny_schema() {
  static const Schema s{{"demo",
                         {{"x", KeyType::real, "1.5", {}},
                          {"n", KeyType::integer, "3", {}},
                          {"mode", KeyType::text, "a", {"a", "b"}},
                          {"list", KeyType::real_list, "1, 2", {}},
                          {"on", KeyType::boolean, "false", {}}}}};
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config defaults and explicit values") {
  const Config c = Config::parse("[demo]\nx = 2.25\nlist = 0.5, -1e-3\non = true\n", tiny_schema());
  const Section s = c.section("demo");
  CHECK(s.real("x") == 2.25);
  CHECK(s.integer("n") == 3);
  CHECK(s.text("mode") == "a");
  CHECK(s.reals("list") == std::vector<double>{0.5, -1e-3});
  CHECK(s.flag("on"));
  CHECK(Config::parse("", tiny_schema()).section("demo").real("x") == 1.5);
}

TEST_CASE("config schema errors") {
  const Schema& sc = tiny_schema();
  CHECK_THROWS_AS(Config::parse("[other]\n", sc), SchemaError);
  CHECK_THROWS_AS(Config::parse("[demo]\ny = 1\n", sc), SchemaError);
  CHECK_THROWS_AS(Config::parse("x = 1\n", sc), SchemaError);
  CHECK_THROWS_AS(Config::parse("[demo]\nx = abc\n", sc), SchemaError);
  CHECK_THROWS_AS(Config::parse("[demo]\nn = 2.5\n", sc), SchemaError);
  CHECK_THROWS_AS(Config::parse("[demo]\nmode = c\n", sc), SchemaError);
  CHECK_THROWS_AS(Config::parse("[demo]\nlist =\n", sc), SchemaError);
  CHECK_THROWS_AS(Config::parse("[demo]\non = maybe\n", sc), SchemaError);
}

TEST_CASE("FNV-1a reference vectors") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("csv formatting round-trips doubles") {
  CHECK(format_real(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_real(1.0 / 3.0)) == 1.0 / 3.0);
  CsvTable t({"a", "b"});
  t.add({1, 0.5});
  CHECK(t.render() == "a,b\n1,0.5\n");
  CHECK_THROWS(t.add({1}));
}

TEST_CASE("manifest round trip") {
  RunManifest m;
  m.command = "demo";
  m.config_hash = "00ff";
  m.seed = 42;
  m.fingerprints = {"C=2@calibration/seed3/n3"};
  m.tool_version = kToolVersion;
  m.wall_time = 0.25;
  m.checks = {{"one", true, "ok"}, {"two", false, "bad"}};
  m.artifacts = {"demo-summary.csv"};
  CHECK_FALSE(m.all_passed());
  const std::string text = m.emit();
  CHECK(nlohmann::json::parse(text)["all_passed"] == false);
  CHECK(RunManifest::parse(text) == m);
}

TEST_CASE("run reports schema errors with exit status 2") {
  std::ostringstream err;
  RunOptions o;
  o.command = "kato-eval";
  o.config_text = "[kato-eval]\ndeltas =\n";
  o.out_dir = fresh_dir("kinetic_cli_schema").string();
  CHECK(run(o, err) == 2);
  CHECK(nlohmann::json::parse(err.str()).contains("error"));
}

TEST_CASE("selftest and constant Kato evaluation") {
  std::ostringstream err;
  const fs::path dir = fresh_dir("kinetic_cli_run");
  RunOptions o;
  o.command = "selftest";
  o.out_dir = dir.string();
  CHECK(run(o, err) == 0);
  CHECK(fs::exists(dir / "selftest-manifest.json"));

  o.command = "kato-eval";
  o.config_text = "[kato-eval]\nd = 1\nlambdas = 1\nbetas = 1\ndeltas = 0.5\n";
  o.seed = 5;
  CHECK(run(o, err) == 0);
  const RunManifest m = RunManifest::parse(slurp(dir / "kato-eval-manifest.json"));
  CHECK(m.seed == 5);
  CHECK(m.all_passed());
  REQUIRE_FALSE(m.artifacts.empty());
  const std::string csv = slurp(dir / m.artifacts.front());
  CHECK(csv.find("lambda,beta,delta,value") == 0);
}
