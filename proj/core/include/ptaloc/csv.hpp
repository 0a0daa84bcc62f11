#pragma once

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

namespace ptaloc {

/// One CSV field. Doubles are written with %.17g so files round-trip and
/// reruns with the same inputs produce identical bytes.
class CsvCell {
 public:
  CsvCell(double v);
  CsvCell(int v) : text_(std::to_string(v)) {}
  CsvCell(long v) : text_(std::to_string(v)) {}
  CsvCell(unsigned long v) : text_(std::to_string(v)) {}
  CsvCell(unsigned long long v) : text_(std::to_string(v)) {}
  CsvCell(const char* v) : text_(v) {}
  CsvCell(std::string v) : text_(std::move(v)) {}

  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

/// Writes `# key=value` comment lines, then a header and rows.
class CsvWriter {
 public:
  using Meta = std::vector<std::pair<std::string, std::string>>;

  CsvWriter(const std::string& path, const Meta& meta);

  void header(std::initializer_list<std::string> names);
  void header(const std::vector<std::string>& names);
  void row(std::initializer_list<CsvCell> cells);
  void row(const std::vector<CsvCell>& cells);

 private:
  std::ofstream out_;
  std::string path_;
  std::size_t columns_ = 0;
};

/// Parsed CSV: comment lines become `meta`, the first other line is the header.
struct CsvTable {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  std::size_t column_index(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

}  // namespace ptaloc
