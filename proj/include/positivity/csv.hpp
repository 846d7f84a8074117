#pragma once

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "positivity/errors.hpp"

namespace positivity::csv {

// Minimal comma-separated reader for the plain numeric files this project
// uses. No quoting or escapes; fields are trimmed of surrounding whitespace.

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // data rows, header excluded

  int column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    return -1;
  }

  int require_column(const std::string& name) const {
    int j = column(name);
    if (j < 0)
      throw Error(ErrorCode::MissingColumn, "column '" + name + "' not found in header");
    return j;
  }
};

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline Table read(std::istream& in, const std::string& source_name) {
  Table t;
  std::string line;
  bool saw_header = false;
  while (std::getline(in, line)) {
    std::string stripped = trim(line);
    if (stripped.empty()) continue;
    auto fields = split_line(line);
    if (!saw_header) {
      t.header = fields;
      saw_header = true;
    } else {
      if (fields.size() != t.header.size())
        throw Error(ErrorCode::UnparseableValue,
                    source_name + ": row " + std::to_string(t.rows.size() + 1) +
                        " has " + std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(t.header.size()));
      t.rows.push_back(std::move(fields));
    }
  }
  if (!saw_header)
    throw Error(ErrorCode::UnparseableValue, source_name + ": empty file (header row required)");
  return t;
}

inline Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::InvalidArgument, "cannot open file: " + path);
  return read(in, path);
}

/// 12 significant digits, the precision every emitted report uses.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline double parse_double(const std::string& field, const std::string& where) {
  const std::string s = trim(field);
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
    throw Error(ErrorCode::UnparseableValue, where + ": cannot parse '" + field + "' as a number");
  return v;
}

inline long parse_int(const std::string& field, const std::string& where) {
  const std::string s = trim(field);
  errno = 0;
  char* end = nullptr;
  long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE)
    throw Error(ErrorCode::UnparseableValue, where + ": cannot parse '" + field + "' as an integer");
  return v;
}

}  // namespace positivity::csv
