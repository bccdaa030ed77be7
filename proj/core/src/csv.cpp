#include "prgp/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "prgp/errors.hpp"

namespace prgp::csv {

std::string format_double(double value) {
  if (std::isnan(value)) {
    return "nan";
  }
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string format_int(long long value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      std::string cell = line.substr(start, i - start);
      if (!cell.empty() && cell.back() == '\r') {
        cell.pop_back();
      }
      cells.push_back(std::move(cell));
      start = i + 1;
    }
  }
  return cells;
}

std::optional<std::size_t> Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) {
      return i;
    }
  }
  return std::nullopt;
}

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("csv: cannot open " + path);
  }
  Table table;
  std::string line;
  if (!std::getline(in, line)) {
    throw EmptyDataError("csv: empty file " + path);
  }
  table.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") {
      continue;
    }
    table.rows.push_back(split_line(line));
  }
  return table;
}

std::string join_row(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) {
      out += ',';
    }
    out += cells[i];
  }
  return out;
}

void write_table(const std::string& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("csv: cannot write " + path);
  }
  out << join_row(header) << '\n';
  for (const auto& row : rows) {
    out << join_row(row) << '\n';
  }
  if (!out) {
    throw IoError("csv: write failed for " + path);
  }
}

}  // namespace prgp::csv
