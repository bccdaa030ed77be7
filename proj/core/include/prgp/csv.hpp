#pragma once

#include <optional>
#include <string>
#include <vector>

namespace prgp::csv {

// Shortest round-trip decimal form; keeps repeated runs byte-identical.
std::string format_double(double value);

std::string format_int(long long value);

std::vector<std::string> split_line(const std::string& line);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by exact header name.
  std::optional<std::size_t> column(const std::string& name) const;
};

// Reads a whole CSV file; throws IoError when unreadable and EmptyDataError
// when there is no header line.
Table read_table(const std::string& path);

void write_table(const std::string& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows);

std::string join_row(const std::vector<std::string>& cells);

}  // namespace prgp::csv
