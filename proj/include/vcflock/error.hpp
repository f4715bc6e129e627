#pragma once

#include <memory>
#include <stdexcept>
#include <string>

namespace vcflock {

struct Trajectory;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A singular kernel was evaluated at zero separation.
class SingularEvaluation : public Error {
 public:
  using Error::Error;
};

/// The kernel antiderivative does not exist (strongly singular kernel).
class NonIntegrable : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// A right-hand side produced a non-finite entry.
class NonFiniteState : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Requested a configuration the library deliberately does not support.
class OutOfScope : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// The adaptive step size fell below dt_min without meeting the tolerance.
class StepFloorHit : public Error {
 public:
  StepFloorHit(const std::string& what, double time, double dt, int i, int j,
               std::shared_ptr<const Trajectory> partial = nullptr)
      : Error(what), time_(time), dt_(dt), i_(i), j_(j), partial_(std::move(partial)) {}

  double time() const { return time_; }
  double dt() const { return dt_; }
  int first() const { return i_; }
  int second() const { return j_; }
  /// Trajectory accumulated up to the abort, when the integrator kept one.
  const std::shared_ptr<const Trajectory>& partial() const { return partial_; }

 private:
  double time_;
  double dt_;
  int i_;
  int j_;
  std::shared_ptr<const Trajectory> partial_;
};

}  // namespace vcflock
