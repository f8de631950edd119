#pragma once

#include <stdexcept>
#include <string>

namespace steer {

/// Failure categories; each maps to one CLI exit code.
enum class ErrorKind {
  kSchema,          // invalid configuration or input shape
  kGrid,            // mismatched or unusable time grids
  kDivergence,      // non-finite state during integration
  kCoercivity,      // Gramian smallest eigenvalue below the floor
  kSingularGramian, // optimal Gramian too ill-conditioned to invert
  kNonConvergence,  // Picard iteration exhausted max_iter
  kModel,           // invalid model parameters
  kApplicability,   // operation not defined for this system
  kSingularInput,   // input matrix (or flat output) degenerate
  kComparison,      // reports from different problems compared
};

class SteerError : public std::runtime_error {
 public:
  SteerError(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Carries the smallest eigenvalue that failed the coercivity test.
class CoercivityError : public SteerError {
 public:
  CoercivityError(const std::string& what, double lambda_min)
      : SteerError(ErrorKind::kCoercivity, what), lambda_min_(lambda_min) {}

  double lambda_min() const noexcept { return lambda_min_; }

 private:
  double lambda_min_;
};

const char* to_string(ErrorKind kind);

}  // namespace steer
