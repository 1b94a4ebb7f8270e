#pragma once
// Shared text helpers for CSV output (internal).

#include <cmath>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>

#include "vlmood/error.hpp"

namespace vlmood::detail {

/// Shortest decimal that round-trips; NaN renders as an empty field.
inline std::string format_double(double v) {
  if (std::isnan(v)) return {};
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot create " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

}  // namespace vlmood::detail
