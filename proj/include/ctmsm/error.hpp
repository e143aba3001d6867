#pragma once

#include <stdexcept>
#include <string>

namespace ctmsm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite numbers, broken matrix invariants, misaligned inputs.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Malformed tabular or structured input (headers, columns, ordering).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a model invariant, e.g. a sighting in an unsurveyed area.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericRangeError : public Error {
 public:
  using Error::Error;
};

class UndefinedSojourn : public Error {
 public:
  using Error::Error;
};

class InvalidInterval : public Error {
 public:
  using Error::Error;
};

/// Brute-force enumeration refused because the state space is too large.
class EnumerationLimit : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class CovarianceError : public Error {
 public:
  using Error::Error;
};

/// Invalid model or simulation configuration file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A fit report that does not belong to the given model.
class MismatchError : public Error {
 public:
  using Error::Error;
};

/// Invalid command-line usage, e.g. a missing seed.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Output files or directories cannot be written.
class OutputError : public Error {
 public:
  using Error::Error;
};

}  // namespace ctmsm
