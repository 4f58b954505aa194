#pragma once

#include <string>
#include <vector>

namespace kinetic::cli {

// 17 significant digits, "." decimal.
std::string format_real(double v);

class CsvCell {
 public:
  CsvCell(double v) : text_(format_real(v)) {}
  CsvCell(long v) : text_(std::to_string(v)) {}
  CsvCell(int v) : text_(std::to_string(v)) {}
  CsvCell(unsigned long v) : text_(std::to_string(v)) {}
  CsvCell(std::string v) : text_(std::move(v)) {}
  CsvCell(const char* v) : text_(v) {}
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add(std::vector<CsvCell> row);
  size_t rows() const { return rows_.size(); }
  std::string render() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace kinetic::cli
