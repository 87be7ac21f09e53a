#include "railhaz/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "railhaz/common.hpp"

namespace railhaz::io {

std::size_t csv_table::col(std::string_view name) const {
  if (auto const idx = find_col(name)) {
    return *idx;
  }
  throw validation_error{"missing mandatory column: " + std::string{name}};
}

std::optional<std::size_t> csv_table::find_col(std::string_view name) const {
  for (std::size_t i = 0; i != header.size(); ++i) {
    if (header[i] == name) {
      return i;
    }
  }
  return std::nullopt;
}

csv_table parse_csv(std::string_view text) {
  csv_table out;
  std::vector<std::string> row;
  std::string cell;
  bool in_quotes = false;
  bool row_started = false;
  auto const push_cell = [&] {
    row.push_back(std::move(cell));
    cell.clear();
  };
  auto const push_row = [&] {
    push_cell();
    if (out.header.empty()) {
      out.header = std::move(row);
    } else {
      out.rows.push_back(std::move(row));
    }
    row.clear();
    row_started = false;
  };
  for (std::size_t i = 0; i != text.size(); ++i) {
    char const c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cell.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"': in_quotes = true; row_started = true; break;
      case ',': push_cell(); row_started = true; break;
      case '\r': break;
      case '\n':
        if (row_started || !cell.empty() || !row.empty()) {
          push_row();
        }
        break;
      default: cell.push_back(c); row_started = true; break;
    }
  }
  if (row_started || !cell.empty() || !row.empty()) {
    push_row();
  }
  // Ragged rows: pad to header width so lookups stay in bounds.
  for (auto& r : out.rows) {
    r.resize(std::max(r.size(), out.header.size()));
  }
  return out;
}

csv_table read_csv(std::string const& path) {
  return parse_csv(read_file(path));
}

std::string csv_escape(std::string_view cell) {
  if (cell.find_first_of(",\"\n\r") == std::string_view::npos) {
    return std::string{cell};
  }
  std::string out = "\"";
  for (char const c : cell) {
    if (c == '"') {
      out += "\"\"";
    } else {
      out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

std::string join_csv(std::vector<std::string> const& cells) {
  std::string out;
  for (std::size_t i = 0; i != cells.size(); ++i) {
    if (i != 0) {
      out.push_back(',');
    }
    out += cells[i];
  }
  return out;
}

std::string format_g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

void write_file(std::string const& path, std::string_view content) {
  std::ofstream os{path, std::ios::binary};
  if (!os) {
    throw validation_error{"cannot open for writing: " + path};
  }
  os.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!os) {
    throw std::runtime_error{"write failed: " + path};
  }
}

std::string read_file(std::string const& path) {
  std::ifstream is{path, std::ios::binary};
  if (!is) {
    throw validation_error{"cannot open file: " + path};
  }
  std::ostringstream ss;
  ss << is.rdbuf();
  return std::move(ss).str();
}

std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) {
    return std::nullopt;
  }
  std::string buf{s};
  char* end = nullptr;
  errno = 0;
  double const v = std::strtod(buf.c_str(), &end);
  if (errno != 0 || end != buf.c_str() + buf.size()) {
    return std::nullopt;
  }
  return v;
}

std::optional<long long> parse_int(std::string_view s) {
  if (s.empty()) {
    return std::nullopt;
  }
  std::string buf{s};
  char* end = nullptr;
  errno = 0;
  long long const v = std::strtoll(buf.c_str(), &end, 10);
  if (errno != 0 || end != buf.c_str() + buf.size()) {
    return std::nullopt;
  }
  return v;
}

}  // namespace railhaz::io
