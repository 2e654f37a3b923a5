#pragma once

#include <stdexcept>
#include <string>

namespace flexreg {

/// Bad external input (files, flags, out-of-range fields). CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an internal contract (mismatched vector lengths, infeasible
/// residuals, states outside their invariants). CLI maps this to exit code 1.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace flexreg
