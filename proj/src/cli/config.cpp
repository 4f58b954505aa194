#include "kinetic/cli/config.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <sstream>

namespace kinetic::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_real(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* end = t.data() + t.size();
  auto [p, ec] = std::from_chars(t.data(), end, out);
  return ec == std::errc() && p == end;
}

bool parse_integer(const std::string& s, long& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* end = t.data() + t.size();
  auto [p, ec] = std::from_chars(t.data(), end, out);
  return ec == std::errc() && p == end;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  if (!s.empty() && s.back() == ',') out.push_back("");
  return out;
}

void validate_value(const std::string& section, const KeySpec& spec, const std::string& value) {
  const std::string where = "[" + section + "] " + spec.name;
  switch (spec.type) {
    case KeyType::real: {
      double v;
      if (!parse_real(value, v)) throw SchemaError(where + ": expected a number, got '" + value + "'");
      break;
    }
    case KeyType::integer: {
      long v;
      if (!parse_integer(value, v)) throw SchemaError(where + ": expected an integer, got '" + value + "'");
      break;
    }
    case KeyType::boolean:
      if (value != "true" && value != "false") throw SchemaError(where + ": expected true or false");
      break;
    case KeyType::text:
      if (!spec.choices.empty() && std::find(spec.choices.begin(), spec.choices.end(), value) == spec.choices.end())
        throw SchemaError(where + ": '" + value + "' is not one of the allowed values");
      break;
    case KeyType::real_list: {
      if (trim(value).empty()) throw SchemaError(where + ": list must not be empty");
      for (const auto& item : split_list(value)) {
        double v;
        if (!parse_real(item, v)) throw SchemaError(where + ": bad list entry '" + item + "'");
      }
      break;
    }
  }
}

}  // namespace

uint64_t fnv1a(std::string_view bytes) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Section::Section(std::string name, std::map<std::string, std::string> values)
    : name_(std::move(name)), values_(std::move(values)) {}

const std::string& Section::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw SchemaError("[" + name_ + "] " + key + ": key not in schema");
  return it->second;
}

double Section::real(const std::string& key) const {
  double v;
  if (!parse_real(raw(key), v)) throw SchemaError("[" + name_ + "] " + key + ": expected a number");
  return v;
}

long Section::integer(const std::string& key) const {
  long v;
  if (!parse_integer(raw(key), v)) throw SchemaError("[" + name_ + "] " + key + ": expected an integer");
  return v;
}

const std::string& Section::text(const std::string& key) const { return raw(key); }

std::vector<double> Section::reals(const std::string& key) const {
  const std::string& s = raw(key);
  if (trim(s).empty()) throw SchemaError("[" + name_ + "] " + key + ": list must not be empty");
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    double v;
    if (!parse_real(item, v)) throw SchemaError("[" + name_ + "] " + key + ": bad list entry '" + item + "'");
    out.push_back(v);
  }
  return out;
}

bool Section::flag(const std::string& key) const { return raw(key) == "true"; }

std::string Section::canonical() const {
  std::string out = "[" + name_ + "]\n";
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

Config Config::parse(const std::string& text, const Schema& schema) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw SchemaError("config: " + e.message() + " at line " + std::to_string(e.line()));
  }
  // Empty sections do not reach the tree; check every header.
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    line = trim(line);
    if (line.size() >= 2 && line.front() == '[' && line.back() == ']') {
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (!schema.count(name)) throw SchemaError("config: unknown section [" + name + "]");
    }
  }
  Config cfg;
  cfg.schema_ = &schema;
  for (const auto& [name, node] : tree) {
    auto sec = schema.find(name);
    if (node.empty() || sec == schema.end())
      throw SchemaError("config: '" + name + "' is not a known section");
    auto& values = cfg.explicit_[name];
    for (const auto& [key, leaf] : node) {
      if (!leaf.empty()) throw SchemaError("config: nested key in [" + name + "]");
      auto spec = std::find_if(sec->second.begin(), sec->second.end(), [&](const KeySpec& k) { return k.name == key; });
      if (spec == sec->second.end()) throw SchemaError("config: unknown key '" + key + "' in [" + name + "]");
      const std::string value = trim(leaf.data());
      validate_value(name, *spec, value);
      values[key] = value;
    }
  }
  return cfg;
}

Config Config::load(const std::string& path, const Schema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("config: cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), schema);
}

Section Config::section(const std::string& name) const {
  auto sec = schema_->find(name);
  if (sec == schema_->end()) throw SchemaError("config: unknown section [" + name + "]");
  std::map<std::string, std::string> values;
  for (const auto& spec : sec->second) values[spec.name] = spec.default_value;
  auto it = explicit_.find(name);
  if (it != explicit_.end())
    for (const auto& [k, v] : it->second) values[k] = v;
  return Section(name, std::move(values));
}

}  // namespace kinetic::cli
