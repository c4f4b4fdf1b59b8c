#pragma once

#include <stdexcept>
#include <string>

namespace speednet {

// Base class for all library errors. CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/layer dimension violations. Message names the offending dimension.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Bad run configuration: unknown key, missing required value, invalid combination.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Filesystem and decode failures. Message carries the path.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Non-finite values or failed numerical checks.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Checkpoint integrity failures, each its own type so callers can tell them apart.
class BadMagicError : public IoError {
 public:
  explicit BadMagicError(const std::string& msg) : IoError(msg) {}
};

class VersionError : public IoError {
 public:
  explicit VersionError(const std::string& msg) : IoError(msg) {}
};

class CrcError : public IoError {
 public:
  explicit CrcError(const std::string& msg) : IoError(msg) {}
};

}  // namespace speednet
