#pragma once

#include <stdexcept>
#include <string>

namespace facet {

/// Base class for every error raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Caller violated an operation's contract (bad argument, wrong state).
struct UsageError : Error {
  using Error::Error;
};

/// Tensor shapes do not line up for the requested operation.
struct DimensionError : Error {
  using Error::Error;
};

/// Inconsistent model or pipeline configuration.
struct ConfigError : Error {
  using Error::Error;
};

/// Malformed or truncated file.
struct FormatError : Error {
  using Error::Error;
};

/// Non-finite or otherwise invalid numeric input.
struct NumericError : Error {
  using Error::Error;
};

/// Training diverged or could not proceed.
struct TrainingError : Error {
  using Error::Error;
};

}  // namespace facet
