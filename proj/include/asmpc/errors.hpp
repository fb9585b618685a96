#pragma once

#include <stdexcept>
#include <string>

namespace asmpc {

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NumericalBreakdown : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnboundedDirection : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionTooLarge : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct EmptyDomain : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularInnovation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoiseBudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InfeasibleBudget : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// MPC became infeasible mid-run; recursive feasibility says this must not
// happen after a feasible t = 0, so callers surface it loudly.
struct InfeasibleAtRuntime : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace asmpc
