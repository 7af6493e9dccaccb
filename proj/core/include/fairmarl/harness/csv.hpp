#pragma once

#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

namespace fairmarl {

// Shortest-faithful numeric cell formatting shared by every emitted table,
// so reruns of one configuration stay byte-identical.
std::string csv_num(double v);

// Comma-separated writer with a fixed column list. Cells must not contain
// commas or newlines; rows are '\n'-terminated regardless of platform.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns);

  void row(const std::vector<std::string>& cells);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  std::size_t arity_ = 0;
};

struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // throws on unknown name
  const std::string& cell(std::size_t row, const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

}  // namespace fairmarl
