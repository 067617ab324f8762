#pragma once

#include <stdexcept>
#include <string>

namespace parahom {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// 4dΛ > 1 for a discrete-time step, or an explicit step that is too large.
struct StabilityError : std::domain_error {
  using std::domain_error::domain_error;
};

struct EllipticityError : std::domain_error {
  using std::domain_error::domain_error;
};

// Box too small, kernel tail too heavy, and similar sizing problems.
struct SizingError : std::domain_error {
  using std::domain_error::domain_error;
};

struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace parahom
