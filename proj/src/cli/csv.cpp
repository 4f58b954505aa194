#include "kinetic/cli/csv.hpp"

#include <fmt/format.h>

#include <stdexcept>

namespace kinetic::cli {

std::string format_real(double v) { return fmt::format("{:.17g}", v); }

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
  if (header_.empty()) throw std::invalid_argument("CsvTable: header required");
}

void CsvTable::add(std::vector<CsvCell> row) {
  if (row.size() != header_.size()) throw std::invalid_argument("CsvTable: row width differs from header");
  std::vector<std::string> r;
  r.reserve(row.size());
  for (auto& c : row) r.push_back(c.text());
  rows_.push_back(std::move(r));
}

std::string CsvTable::render() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

}  // namespace kinetic::cli
