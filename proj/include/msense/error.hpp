#pragma once

#include <stdexcept>
#include <string>

namespace msense {

/// Stable process exit codes. The CLI maps every thrown Error to one of these.
enum class ExitCode : int {
  kSuccess = 0,
  kConvergenceFailure = 2,
  kConfigError = 3,
  kRegimeGuardrail = 4,
};

/// Base of all library errors. `reason()` is a short machine-readable tag
/// (e.g. "divergence", "degenerate_spectrum") written to run metadata.
class Error : public std::runtime_error {
 public:
  Error(ExitCode code, std::string reason, const std::string& message)
      : std::runtime_error(message), code_(code), reason_(std::move(reason)) {}

  ExitCode code() const noexcept { return code_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  ExitCode code_;
  std::string reason_;
};

/// Shape or argument mismatch in an API call.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& message)
      : Error(ExitCode::kConfigError, "dimension_mismatch", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error(ExitCode::kConfigError, "config_error", message) {}
};

/// Requested parameters fall outside a supported or theoretically valid regime.
class RegimeError : public Error {
 public:
  explicit RegimeError(const std::string& message)
      : Error(ExitCode::kRegimeGuardrail, "regime_guardrail", message) {}
};

/// Materialized ensemble would exceed the memory budget; use streamed mode.
class MemoryBudgetError : public Error {
 public:
  explicit MemoryBudgetError(const std::string& message)
      : Error(ExitCode::kRegimeGuardrail, "memory_budget", message) {}
};

/// The r-th eigenvalue (by magnitude) of a spectral matrix is numerically zero.
class DegenerateSpectrumError : public Error {
 public:
  explicit DegenerateSpectrumError(const std::string& message)
      : Error(ExitCode::kConvergenceFailure, "degenerate_spectrum", message) {}
};

/// Gradient descent loss blew up past the divergence threshold.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& message)
      : Error(ExitCode::kConvergenceFailure, "divergence", message) {}
};

}  // namespace msense
