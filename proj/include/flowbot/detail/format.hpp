#pragma once

#include <Eigen/Core>
#include <charconv>
#include <cstdio>
#include <string>

#include "flowbot/errors.hpp"

namespace flowbot::detail {

/// Shortest representation with 17 significant digits: enough for exact
/// double round-trips through text.
inline std::string g17(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

inline std::string g17_triplet(const Eigen::Vector3d& v) {
  return g17(v.x()) + " " + g17(v.y()) + " " + g17(v.z());
}

/// Strict full-token double parse; `what` names the value in error messages.
inline double parse_double(std::string_view token, const std::string& what) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ParseError(what + ": expected a number, got '" + std::string(token) + "'");
  return value;
}

inline long parse_long(std::string_view token, const std::string& what) {
  long value = 0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ParseError(what + ": expected an integer, got '" + std::string(token) + "'");
  return value;
}

}  // namespace flowbot::detail
