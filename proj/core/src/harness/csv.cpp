#include "fairmarl/harness/csv.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace fairmarl {

std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& columns)
    : path_(path), out_(path, std::ios::binary), arity_(columns.size()) {
  if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
  if (columns.empty()) throw std::invalid_argument("csv needs at least one column");
  row(columns);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != arity_)
    throw std::logic_error("csv row arity mismatch in " + path_ + ": expected " +
                           std::to_string(arity_) + ", got " + std::to_string(cells.size()));
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
  if (!out_) throw std::runtime_error("write failed on " + path_);
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  throw std::out_of_range("csv column not found: " + name);
}

const std::string& CsvTable::cell(std::size_t row, const std::string& name) const {
  return rows.at(row).at(static_cast<std::size_t>(column(name)));
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (line.empty()) cells.emplace_back();
    if (first) {
      t.columns = std::move(cells);
      first = false;
    } else {
      t.rows.push_back(std::move(cells));
    }
  }
  if (first) throw std::runtime_error("empty csv: " + path);
  return t;
}

}  // namespace fairmarl
