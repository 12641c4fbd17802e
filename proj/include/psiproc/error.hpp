#pragma once

#include <stdexcept>
#include <string>

namespace psiproc {

// Base class for every error raised by the library. The CLI maps
// ConfigError to exit code 2 and everything else to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the documented domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Invalid argument shape (empty grid, size mismatch, bad weights).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

class DuplicatePointError : public Error {
 public:
  explicit DuplicatePointError(double x)
      : Error("duplicate split point at " + std::to_string(x)), point(x) {}
  double point;
};

// Query that needs state the object was not constructed with (e.g. alpha).
class StateError : public Error {
 public:
  using Error::Error;
};

class NumericalBlowupError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, double z) : Error(what), location(z) {}
  double location;
};

class GridMismatchError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace psiproc
