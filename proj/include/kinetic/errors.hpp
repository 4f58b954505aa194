#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace kinetic {

// Invalid mathematical domain (t <= 0, alpha out of range, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed arguments (sizes, counts).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A precondition between several inputs does not hold.
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// ODE or quadrature produced non-finite values.
class IntegrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Linear algebra failure (matrix not positive definite, singular Gramian).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SmallnessError : public std::runtime_error {
 public:
  SmallnessError(const std::string& what, double required_horizon)
      : std::runtime_error(what), required_horizon_(required_horizon) {}
  double required_horizon() const { return required_horizon_; }

 private:
  double required_horizon_;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

// Monte Carlo run rejected (too many flagged paths, infinite variance).
class RunError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Chaining step exceeded its bound.
class ConstructionError : public std::runtime_error {
 public:
  ConstructionError(const std::string& what, int step)
      : std::runtime_error(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

}  // namespace kinetic
