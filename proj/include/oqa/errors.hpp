#pragma once

#include <stdexcept>

namespace oqa {

// Base class for all errors thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape mismatch between operands.
struct DimensionError : Error {
  using Error::Error;
};

// Zero-norm vector where a direction is required.
struct DegenerateVectorError : Error {
  using Error::Error;
};

// Argument outside its documented range.
struct ParameterError : Error {
  using Error::Error;
};

// Malformed file contents (bad magic, bad header).
struct FormatError : Error {
  using Error::Error;
};

// Inputs that are individually valid but mutually inconsistent.
struct ConsistencyError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// Caller violated an API contract (e.g. backward on a non-scalar).
struct ContractError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Correlation of a constant sequence.
struct UndefinedCorrelationError : Error {
  using Error::Error;
};

}  // namespace oqa
