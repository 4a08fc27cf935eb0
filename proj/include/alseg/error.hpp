#pragma once

#include <stdexcept>
#include <string>

namespace alseg {

// Root of every error thrown by the library. Subclasses name the failure
// category; callers that only need a message can catch this one.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents or vector lengths that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A value outside the documented domain of an operation.
class InputError : public Error {
 public:
  using Error::Error;
};

// An operation that is invalid for the current PoolState.
class StateError : public Error {
 public:
  using Error::Error;
};

// Optimizer failure, e.g. a non-finite gradient.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent RunConfig / strategy settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File system or format failure, always carrying the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace alseg
