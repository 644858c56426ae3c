#pragma once

#include <stdexcept>
#include <string>

namespace clm {

enum class error_code {
  invalid_argument,
  domain_error,
  not_bounded,
  escaped,
  empty_window,
  ambiguous_component,
  degenerate_input,
  branch_topology,
  no_l1_intersection,
  order_ambiguity,
  not_converged,
  no_convergence,
  converged_to_lower_period,
  no_complex_pair,
  orbit_lost,
  io_error,
};

inline const char* to_string(error_code c) {
  switch (c) {
    case error_code::invalid_argument: return "InvalidArgument";
    case error_code::domain_error: return "DomainError";
    case error_code::not_bounded: return "NotBounded";
    case error_code::escaped: return "Escaped";
    case error_code::empty_window: return "EmptyWindow";
    case error_code::ambiguous_component: return "AmbiguousComponent";
    case error_code::degenerate_input: return "DegenerateInput";
    case error_code::branch_topology: return "BranchTopologyError";
    case error_code::no_l1_intersection: return "NoL1Intersection";
    case error_code::order_ambiguity: return "OrderAmbiguity";
    case error_code::not_converged: return "NotConverged";
    case error_code::no_convergence: return "NoConvergence";
    case error_code::converged_to_lower_period: return "ConvergedToLowerPeriod";
    case error_code::no_complex_pair: return "NoComplexPair";
    case error_code::orbit_lost: return "OrbitLost";
    case error_code::io_error: return "IoError";
  }
  return "Unknown";
}

// Failures that mean "the numerics did not settle" rather than "the request
// is outside the mathematical domain".
inline bool is_convergence_failure(error_code c) {
  return c == error_code::not_converged || c == error_code::no_convergence ||
         c == error_code::orbit_lost || c == error_code::order_ambiguity;
}

class error : public std::runtime_error {
 public:
  error(error_code code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  error_code code() const noexcept { return code_; }

 private:
  error_code code_;
};

}  // namespace clm
