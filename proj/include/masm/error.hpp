#pragma once

#include <stdexcept>
#include <string>

namespace masm {

// Bad dimensions, malformed payloads, inconsistent configuration.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Exhaustive search would exceed the enumeration budget.
class SearchSpaceTooLarge : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// An iterative or numerical procedure failed to reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Square root of a negative quantity inside the replica noise map.
class NegativeRadicand : public ConvergenceError {
 public:
  NegativeRadicand(const std::string& what, double c, double q)
      : ConvergenceError(what), c_(c), q_(q) {}
  double c() const { return c_; }
  double q() const { return q_; }

 private:
  double c_;
  double q_;
};

}  // namespace masm
