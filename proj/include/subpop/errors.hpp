#pragma once

#include <stdexcept>
#include <string>

namespace subpop {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input files: bad CSV cells, missing columns, empty files.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Dataset contents violate the sampling design (e.g. a labeled source row
/// in the excluded (y=1, a=1) cell, or a feature dimension mismatch).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration values (unknown method names, zero replications, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Model fitting cannot proceed (single-class labels, zero total weight).
class FitError : public Error {
 public:
  using Error::Error;
};

/// Numeric trouble: non-finite values, dimension mismatches at predict time,
/// nonpositive arguments where a logarithm is taken.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A population quantity is not identified from the data at hand
/// (singular moment system, uninformative domain model, empty cells).
class EstimationError : public Error {
 public:
  using Error::Error;
};

}  // namespace subpop
