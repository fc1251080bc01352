#pragma once

#include <stdexcept>
#include <string>

namespace ssrcnn {

// Base for every error the library raises. `kind()` is the stable
// machine-readable tag the CLI reports in its error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class InvalidGeometry : public Error {
 public:
  explicit InvalidGeometry(const std::string& m) : Error("invalid_geometry", m) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& m) : Error("dimension_mismatch", m) {}
};

class NonFinite : public Error {
 public:
  explicit NonFinite(const std::string& m) : Error("non_finite", m) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& m) : Error("invalid_argument", m) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& m) : Error("config_error", m) {}
};

// Malformed input file. `path` is a JSON-pointer-like location
// ("/images/3/objects/0/bbox") of the offending field.
class ParseError : public Error {
 public:
  ParseError(std::string path, const std::string& m)
      : Error("parse_error", path + ": " + m), path_(std::move(path)), detail_(m) {}
  const std::string& path() const noexcept { return path_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string path_;
  std::string detail_;
};

}  // namespace ssrcnn
