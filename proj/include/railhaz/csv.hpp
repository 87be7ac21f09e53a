#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace railhaz::io {

struct csv_table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a column, or throws validation_error naming the column.
  std::size_t col(std::string_view name) const;
  std::optional<std::size_t> find_col(std::string_view name) const;
};

// Reads a whole CSV file. Handles quoted fields, CRLF, and a trailing
// newline; rows shorter than the header are padded with empty strings.
csv_table read_csv(std::string const& path);

csv_table parse_csv(std::string_view text);

// One CSV line from already-escaped cells.
std::string join_csv(std::vector<std::string> const& cells);

std::string csv_escape(std::string_view cell);

// Numeric formatting used across all CSV/JSON output: 6 significant digits,
// shortest form ("%.6g").
std::string format_g6(double v);

// Fixed decimals, used by the report tables.
std::string format_fixed(double v, int decimals);

void write_file(std::string const& path, std::string_view content);

std::string read_file(std::string const& path);

// Strict double/long parsers: full-token match or nullopt.
std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

}  // namespace railhaz::io
