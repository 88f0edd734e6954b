#pragma once

#include <stdexcept>
#include <string>

namespace twm {

/// Base of every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad or inconsistent user configuration (unknown names, bad keys, gates).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Degenerate target geometry (singular or indefinite metric).
class GeometryError : public Error {
public:
  using Error::Error;
};

/// An algebraic construction whose preconditions do not hold.
class ConstructionError : public Error {
public:
  using Error::Error;
};

/// Initial data that cannot satisfy the constraint on the chosen domain.
class DataError : public Error {
public:
  using Error::Error;
};

/// Non-finite values or a state leaving its domain of validity.
class NumericalError : public Error {
public:
  using Error::Error;
};

/// An operation needs data the input does not carry (e.g. a matrix rep).
class CapabilityError : public Error {
public:
  using Error::Error;
};

}  // namespace twm
