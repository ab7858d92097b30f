#pragma once

#include <stdexcept>
#include <string>

namespace rotalith {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid input data or configuration (out-of-ball points, bad sizes, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated files.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Divergence, NaN, or other numeric breakdown.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace rotalith
