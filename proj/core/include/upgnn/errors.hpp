#pragma once

#include <stdexcept>
#include <string>

namespace upgnn {

// Base class for all library errors; catch this at API boundaries.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Operand dimensions do not match the operation's contract.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(what) {}
};

// An argument value is outside its documented domain.
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error(what) {}
};

// A configuration value or key is invalid or unknown.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

// An input table violates the documented file contract.
class IngestError : public Error {
 public:
  explicit IngestError(const std::string& what) : Error(what) {}
};

// An ATE was requested on a subset with fewer than two treatment arms.
class UndefinedAteError : public Error {
 public:
  explicit UndefinedAteError(const std::string& what) : Error(what) {}
};

// A file could not be read or written.
class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace upgnn
