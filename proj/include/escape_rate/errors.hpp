#pragma once

#include <stdexcept>
#include <string>

namespace escape_rate {

// Every failure raised by the library derives from Error; the CLI maps the
// concrete type to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the region where a generating function is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Linear solve broke down, usually because z is at or past 1/spectral radius.
class NumericalInstabilityError : public Error {
 public:
  using Error::Error;
};

// A factor or model violates a construction invariant.
class InvalidModelError : public Error {
 public:
  using Error::Error;
};

// The free-product walk is not transient (xi or U(o,o|1) reaches 1).
class NonTransientModelError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class DegenerateModelError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Two independent routes to the same quantity disagree.
class InternalConsistencyError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFactorError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace escape_rate
