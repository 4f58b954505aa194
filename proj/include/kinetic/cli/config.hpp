#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kinetic::cli {

// Malformed configuration: unknown section or key, unparsable or empty value.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class KeyType { real, integer, text, real_list, boolean };

struct KeySpec {
  std::string name;
  KeyType type = KeyType::real;
  std::string default_value;
  std::vector<std::string> choices;  // text keys only; empty = free text
};

using SectionSchema = std::vector<KeySpec>;
using Schema = std::map<std::string, SectionSchema>;

// Resolved keys of one section: explicit values over schema defaults.
class Section {
 public:
  Section() = default;
  Section(std::string name, std::map<std::string, std::string> values);

  const std::string& name() const { return name_; }
  double real(const std::string& key) const;
  long integer(const std::string& key) const;
  const std::string& text(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  bool flag(const std::string& key) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  // key=value lines in key order.
  std::string canonical() const;

 private:
  const std::string& raw(const std::string& key) const;

  std::string name_;
  std::map<std::string, std::string> values_;
};

class Config {
 public:
  // INI text with one section per subcommand; validated against the schema.
  static Config parse(const std::string& text, const Schema& schema);
  static Config load(const std::string& path, const Schema& schema);

  // Section with defaults filled in (all defaults when absent from the file).
  Section section(const std::string& name) const;

 private:
  const Schema* schema_ = nullptr;
  std::map<std::string, std::map<std::string, std::string>> explicit_;
};

// 64-bit FNV-1a.
uint64_t fnv1a(std::string_view bytes);

}  // namespace kinetic::cli
