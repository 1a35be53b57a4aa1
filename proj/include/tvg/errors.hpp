#ifndef TVG_ERRORS_HPP
#define TVG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tvg {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes do not conform for a primitive.
struct DimensionError : Error {
  using Error::Error;
};

// Non-finite value fed into (or produced where forbidden by) a numeric op.
struct NumericError : Error {
  using Error::Error;
};

// A documented precondition of an operation was violated.
struct ContractError : Error {
  using Error::Error;
};

// Invalid configuration value.
struct ConfigError : Error {
  using Error::Error;
};

// Invalid data content (e.g. inverted timestamps in an annotation file).
struct DataError : Error {
  using Error::Error;
};

// Malformed file on disk (bad magic, truncation).
struct FormatError : Error {
  using Error::Error;
};

// Filesystem-level failure.
struct IoError : Error {
  using Error::Error;
};

}  // namespace tvg

#endif  // TVG_ERRORS_HPP
