#pragma once

#include <stdexcept>
#include <string>

namespace divlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes of operands do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A NaN/Inf appeared, or a finite-sample quantity left its valid domain.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-facing configuration (bad alpha, gamma == 1, missing path).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace divlab
