#pragma once

#include <stdexcept>
#include <string>

namespace tlab {

/** Base class for all library errors. */
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/** Unreadable or unwritable files. The CLI maps this to exit code 1. */
class IoError : public Error {
 public:
  using Error::Error;
};

/** Malformed or version-mismatched artifacts. CLI exit code 3. */
class SchemaError : public Error {
 public:
  using Error::Error;
};

/** Iterative solver exceeded its budget without meeting tolerance. CLI exit code 2. */
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/** Non-finite states, degenerate covariances, and similar numerical failures. CLI exit code 2. */
class NumericError : public Error {
 public:
  using Error::Error;
};

/** A requested operating point or attack precondition cannot be met. CLI exit code 2. */
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace tlab
