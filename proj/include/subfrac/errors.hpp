#pragma once

#include <stdexcept>
#include <string>

namespace subfrac {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Quadrature stopped before reaching its tolerance. Carries the best estimate.
class AccuracyError : public std::runtime_error {
 public:
  AccuracyError(const std::string& what, double estimate, double error_bound)
      : std::runtime_error(what), estimate_(estimate), error_bound_(error_bound) {}

  double estimate() const noexcept { return estimate_; }
  double error_bound() const noexcept { return error_bound_; }

 private:
  double estimate_;
  double error_bound_;
};

/// A value that may have underflowed to zero.
struct Flagged {
  double value = 0.0;
  bool underflow = false;
};

inline void require(bool condition, const char* message) {
  if (!condition) throw DomainError(message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw DomainError(message);
}

}  // namespace subfrac
