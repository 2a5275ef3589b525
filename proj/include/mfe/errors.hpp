#pragma once

#include <stdexcept>
#include <string>

namespace mfe {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: parameters out of range, degenerate geometry, malformed files.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A solver stage failed to deliver its contract (non-convergence, breakdown).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace mfe
