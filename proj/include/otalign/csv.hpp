#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "text.hpp"

namespace otalign::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error(ErrorCode::SchemaError, "missing CSV column '" + name + "'");
  }
};

inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.emplace_back(text::trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

/// Plain comma-separated file with a header row; no quoting.
inline Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::StageDependencyError, "cannot open " + path);
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::is_blank(line)) continue;
    auto fields = split(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw Error(ErrorCode::SchemaError, path + ":" + std::to_string(lineno) + ": expected " +
                                              std::to_string(t.header.size()) + " fields");
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(lineno);
  }
  if (t.header.empty()) throw Error(ErrorCode::SchemaError, path + ": missing header row");
  return t;
}

inline double to_double(const std::string& s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw Error(ErrorCode::SchemaError, "not a number: '" + s + "'");
  }
  return v;
}

/// Shortest text that reads back to the same double.
inline std::string fmt(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace otalign::csv
