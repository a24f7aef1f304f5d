#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tgx/error.hpp"

namespace tgx::csv {

using Table = std::vector<std::vector<double>>;

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_double(std::string_view field, const std::string& where) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
    throw ParseError("malformed number '" + std::string(field) + "' at " + where);
  }
  return value;
}

// Shortest text that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  size_t pos = 0;
  while (true) {
    size_t comma = line.find(',', pos);
    out.push_back(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

// Numeric table; blank lines are skipped, `skip_header` drops the first row.
inline Table parse_numeric(const std::string& text, const std::string& name, bool skip_header = false) {
  Table rows;
  auto lines = split_lines(text);
  for (size_t i = skip_header ? 1 : 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    std::vector<double> row;
    auto fields = split_fields(lines[i]);
    for (size_t j = 0; j < fields.size(); ++j) {
      row.push_back(parse_double(fields[j], name + ":" + std::to_string(i + 1) + ":" + std::to_string(j + 1)));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Table read_numeric(const std::filesystem::path& path, bool skip_header = false) {
  return parse_numeric(read_file(path), path.string(), skip_header);
}

// Writes to a sibling temporary and renames, so readers never see a partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IOError("cannot write " + tmp.string());
    out << content;
    if (!out) throw IOError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IOError("cannot rename " + tmp.string() + ": " + ec.message());
}

}  // namespace tgx::csv
