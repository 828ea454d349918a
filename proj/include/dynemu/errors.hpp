#pragma once

#include <stdexcept>
#include <string>

namespace dynemu {

// Error taxonomy used for CLI exit codes:
//   ConfigError -> 2, NumericalError -> 3, IoError -> 4.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MismatchedGridsError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// The linearized drift matrix is (numerically) defective; carries the grid
// interval where this happened when known (-1 otherwise).
class NonDiagonalizableError : public NumericalError {
 public:
  explicit NonDiagonalizableError(const std::string& what, int interval = -1)
      : NumericalError(what), interval_(interval) {}
  int interval() const { return interval_; }

 private:
  int interval_;
};

class DegenerateEigenvaluesError : public NonDiagonalizableError {
 public:
  using NonDiagonalizableError::NonDiagonalizableError;
};

class NotPositiveDefiniteError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonFiniteError : public NumericalError {
 public:
  NonFiniteError(const std::string& what, double time, int component)
      : NumericalError(what), time_(time), component_(component) {}
  double time() const { return time_; }
  int component() const { return component_; }

 private:
  double time_;
  int component_;
};

}  // namespace dynemu
