#pragma once

#include <stdexcept>
#include <string>

namespace talfuse {

// Error categories map one-to-one onto CLI exit codes:
//   ValidationError -> 1, ConfigError -> 2, SchemaError / IoError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Data violates a domain invariant (bad score, inverted segment, unknown
// video, id collision, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Caller supplied unusable parameters (weight/file count mismatch,
// non-increasing thresholds, infeasible simulation config, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input bytes are not valid JSON or do not match the documented schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Filesystem failure (unreadable or unwritable path).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace talfuse
