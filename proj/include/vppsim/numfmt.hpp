#pragma once

#include <charconv>
#include <string>

namespace vppsim {

// Shortest text that parses back to exactly v.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// As format_double, but always reads back as a float in TOML ("3" -> "3.0").
inline std::string format_toml_double(double v) {
  std::string s = format_double(v);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace vppsim
