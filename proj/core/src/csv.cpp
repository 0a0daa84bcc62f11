#include "ptaloc/csv.hpp"

#include <cstdio>
#include <sstream>

#include "ptaloc/error.hpp"

namespace ptaloc {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CsvCell::CsvCell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  text_ = buf;
}

CsvWriter::CsvWriter(const std::string& path, const Meta& meta) : out_(path, std::ios::trunc), path_(path) {
  if (!out_) throw Error("cannot open '" + path + "' for writing");
  for (const auto& [k, v] : meta) out_ << "# " << k << '=' << v << '\n';
}

void CsvWriter::header(std::initializer_list<std::string> names) { header(std::vector<std::string>(names)); }

void CsvWriter::header(const std::vector<std::string>& names) {
  columns_ = names.size();
  for (std::size_t i = 0; i < names.size(); ++i) out_ << (i ? "," : "") << names[i];
  out_ << '\n';
}

void CsvWriter::row(std::initializer_list<CsvCell> cells) { row(std::vector<CsvCell>(cells)); }

void CsvWriter::row(const std::vector<CsvCell>& cells) {
  if (columns_ != 0 && cells.size() != columns_) throw Error("csv row width does not match header in " + path_);
  for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i].text();
  out_ << '\n';
  if (!out_) throw Error("failed writing '" + path_ + "'");
}

std::size_t CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw Error("csv has no column '" + name + "'");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) t.meta.emplace_back(line.substr(2, eq - 2), line.substr(eq + 1));
      continue;
    }
    if (t.columns.empty()) {
      t.columns = split_line(line);
    } else {
      t.rows.push_back(split_line(line));
    }
  }
  return t;
}

}  // namespace ptaloc
