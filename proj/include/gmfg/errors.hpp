#pragma once

#include <stdexcept>
#include <string>

namespace gmfg {

/// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: asymmetric matrices, grid mismatches, bad parameters.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a function (e.g. a graphon coordinate outside [0,1]).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or divergence during integration.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A solvability assumption fails for the given data, e.g. the per-mode
/// Riccati equation escapes before t = 0.
class AssumptionViolated : public Error {
 public:
  AssumptionViolated(const std::string& what, int mode, double time)
      : Error(what), mode_(mode), time_(time) {}

  int mode() const noexcept { return mode_; }
  double time() const noexcept { return time_; }

 private:
  int mode_;
  double time_;
};

/// Scenario file problem; carries the 1-based source line when known (0 otherwise).
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0) : Error(what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace gmfg
