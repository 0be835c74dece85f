#pragma once

#include <stdexcept>
#include <string>

namespace flowbot {

/// Malformed input: scene XML, fields CSV, axis JSON.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Geometry or estimation collapsed: empty usable point set, zero-length
/// cross products, contact on the rotation axis, and similar.
class DegenerateError : public std::runtime_error {
 public:
  explicit DegenerateError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem failures (open/read/write).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace flowbot
