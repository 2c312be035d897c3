#pragma once

#include <stdexcept>
#include <string>

namespace provisim {

// Caller passed arguments that violate a precondition (dimension mismatch,
// out-of-range parameter).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Non-finite or otherwise unusable input data.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Singular or near-singular matrix encountered during inversion.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double pivot)
      : std::runtime_error(what), pivot_(pivot) {}

  double pivot() const noexcept { return pivot_; }

 private:
  double pivot_;
};

// H-infinity step rejected because the positive-definiteness condition on
// I - theta*P_pred + C^T V^-1 C P_pred does not hold.
class StabilityError : public std::runtime_error {
 public:
  StabilityError(const std::string& what, double theta, double min_eigenvalue)
      : std::runtime_error(what), theta_(theta), min_eigenvalue_(min_eigenvalue) {}

  double theta() const noexcept { return theta_; }
  double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  double theta_;
  double min_eigenvalue_;
};

}  // namespace provisim
