#pragma once

#include <stdexcept>
#include <string>

namespace foresight {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// API used out of order (e.g. backward before forward).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced or consumed. Never clamped.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data (CSV parse failures and the like).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Files or directories that cannot be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace foresight
