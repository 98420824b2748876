#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hap/core/error.hpp"

namespace hap::harness {

/// Deterministic number formatting shared by every CSV writer.
inline std::string fmt(double x) {
  if (std::isnan(x)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

/// Fields never contain commas or newlines; free text is sanitised.
inline std::string field(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

/// A CSV table: leading `#` lines are kept as comments, then a header row.
struct CsvTable {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }

  [[nodiscard]] std::size_t require_column(const std::string& name) const {
    auto c = column(name);
    if (!c) throw FormatError("csv: missing column '" + name + "'");
    return *c;
  }

  /// Empty cells read as NaN.
  [[nodiscard]] double number(std::size_t row, std::size_t col) const {
    const auto& cell = rows.at(row).at(col);
    if (cell.empty()) return std::nan("");
    try {
      std::size_t used = 0;
      double v = std::stod(cell, &used);
      if (used != cell.size()) throw FormatError("csv: bad number '" + cell + "'");
      return v;
    } catch (const std::logic_error&) {
      throw FormatError("csv: bad number '" + cell + "'");
    }
  }
};

inline CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!have_header && !line.empty() && line[0] == '#') {
      t.comments.push_back(line);
      continue;
    }
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size())
      throw FormatError("csv: row has " + std::to_string(cells.size()) + " fields, header has " +
                        std::to_string(t.header.size()));
    t.rows.push_back(std::move(cells));
  }
  if (!have_header) throw FormatError("csv: no header row");
  return t;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return read_csv(in);
}

inline std::string join_row(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out;
}

}  // namespace hap::harness
