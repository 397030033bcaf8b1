#pragma once

#include <stdexcept>
#include <string>

namespace mim {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (t <= 0, bad order, ...).
struct DomainError : Error {
  using Error::Error;
};

/// A configured size limit was exceeded.
struct ResourceError : Error {
  using Error::Error;
};

/// A component was requested before its prerequisites were built.
struct RecursionOrderError : Error {
  using Error::Error;
};

/// The index universe is not closed under a required operation.
struct TruncationError : Error {
  using Error::Error;
};

/// Recentering data could not be fitted to tolerance.
struct RecenteringError : Error {
  using Error::Error;
};

struct InsufficientDataError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace mim
