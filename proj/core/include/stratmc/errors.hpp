#pragma once

#include <stdexcept>

namespace stratmc {

/// Requested cell count is not an exact d-th power of an integer.
struct NotPerfectPower : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IndexOutOfRange : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/// A standard deviation was requested from fewer than two samples.
struct TooFewSamples : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Operation needs a gradient the integrand does not provide.
struct MissingGradient : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// All per-stratum standard deviations are zero; proportions are undefined.
struct AllZeroVariation : std::domain_error {
  using std::domain_error::domain_error;
};

struct ShapeMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Rate fitting needs at least four budgets spanning a decade.
struct InsufficientSpan : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NonPositiveMse : std::domain_error {
  using std::domain_error::domain_error;
};

struct MissingExactIntegral : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Invalid run configuration (bad budget, strata count, confidence level, ...).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace stratmc
