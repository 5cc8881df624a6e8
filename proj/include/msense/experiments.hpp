#pragma once

#include "msense/bounds.hpp"
#include "msense/config.hpp"
#include "msense/error.hpp"
#include "msense/recovery.hpp"
#include "msense/virtual_diag.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace msense {

inline constexpr const char* kSchemaVersion = "msense.run/1";

/// Ground truth X* = V diag(lambda) V^T, Ustar = V diag(sqrt lambda).
struct PlantedInstance {
  SymMatrix xstar;
  FactorMatrix ustar;
  Vector spectrum;  // descending
  double kappa = 1.0;

  GroundTruth truth() const { return {xstar, ustar}; }
  double sigma_min() const { return spectrum(spectrum.size() - 1); }
};

/// Log-spaced (or linear) spectrum from kappa * sigma0 down to sigma0 on a
/// seeded random orthonormal frame.
PlantedInstance plant_instance(std::size_t d, std::size_t r, double kappa,
                               SpectrumPolicy policy, std::uint64_t seed, double sigma0 = 1.0);

/// Per-trial seeds derived from the base seed. The same trial index gives the
/// same seeds at every m, so sweeps use common random numbers.
struct TrialSeeds {
  std::uint64_t instance = 0;
  std::uint64_t ensemble = 0;
  std::uint64_t noise = 0;
};

TrialSeeds trial_seeds(std::uint64_t base_seed, std::size_t trial);

/// Recovery config assembled from the experiment config (oracle stopping at
/// `tol` unless blind).
RecoveryConfig recovery_config(const ExperimentConfig& config);

// ---- recover ---------------------------------------------------------------

struct RecoverOutcome {
  std::size_t m = 0;
  TrialSeeds seeds;
  EnsembleDescriptor ensemble;
  std::optional<RecoveryResult> result;
  double final_relative_error = 0.0;
  ExitCode exit_code = ExitCode::kSuccess;
  std::string failure_reason;
};

RecoverOutcome cmd_recover(const ExperimentConfig& config);

// ---- phase -----------------------------------------------------------------

struct PhaseCell {
  std::size_t r = 0;
  std::size_t m = 0;
  std::size_t successes = 0;
  std::size_t trials = 0;
  bool bisection = false;

  double success_fraction() const {
    return trials ? static_cast<double>(successes) / static_cast<double>(trials) : 0.0;
  }
};

struct PhaseResult {
  std::vector<PhaseCell> cells;
  /// Smallest m with success rate >= threshold; nullopt if the grid never got there.
  std::map<std::size_t, std::optional<std::size_t>> m_star;
  /// max/min of m*(r)/r over ranks with an m*.
  double ratio_spread = 0.0;
};

/// Geometric grid of `points` sample counts from low to high (rounded, unique).
std::vector<std::size_t> geometric_grid(double low, double high, std::size_t points);

/// Pool-adjacent-violators fit: the weighted least-squares nondecreasing sequence.
std::vector<double> isotonic_nondecreasing(const std::vector<double>& values,
                                           const std::vector<double>& weights);

/// One success/failure trial: relative Frobenius error < success_tol within max_iters.
bool phase_trial(const ExperimentConfig& config, std::size_t r, std::size_t m, std::size_t trial);

PhaseResult cmd_phase(const ExperimentConfig& config);

// ---- noise-floor -----------------------------------------------------------

struct NoiseFloorRow {
  double sigma_multiplier = 0.0;
  double sigma = 0.0;
  double plateau = 0.0;     // median over trials
  double normalized = 0.0;  // plateau / (sigma sqrt(r d)); 0 when sigma = 0
  std::vector<double> trial_plateaus;
  bool all_flattened = true;
};

struct NoiseFloorResult {
  std::size_t m = 0;
  std::vector<NoiseFloorRow> rows;
  double slope = 0.0;              // least squares log(plateau) vs log(sigma), sigma > 0 rows
  double normalized_spread = 0.0;  // max/min of `normalized` over sigma > 0 rows
};

/// Median of the last 10% (at least one) of the logged Frobenius errors.
double plateau_error(const TrajectoryRecord& trajectory);

NoiseFloorResult cmd_noise_floor(const ExperimentConfig& config);

// ---- diagnostics -----------------------------------------------------------

struct DiagnosticsTrial {
  AuditReport independence;
  AuditReport decomposition;
  double identity_max_residual = 0.0;
  bool identities_pass = true;
  double delta_estimate = 0.0;
  double max_closeness = 0.0;
  double max_closeness_after_init = 0.0;  // sup over t >= 1
  double sigma_min = 0.0;
};

struct DiagnosticsResult {
  std::size_t m = 0;
  EpsNet net;
  NetAudit net_audit;
  std::vector<DiagnosticsTrial> trials;
  bool identities_pass = true;
  double identity_max_residual = 0.0;
  std::size_t independence_evaluations = 0;
  std::size_t independence_violations = 0;
  double independence_violation_fraction = 0.0;
  bool independence_pass = false;
  std::size_t decomposition_evaluations = 0;
  std::size_t decomposition_violations = 0;
  std::size_t decomposition_flagged = 0;
  bool decomposition_pass = false;
  double max_closeness_ratio = 0.0;  // sup_t sup_w closeness / sigma_min
  double max_closeness_after_init_ratio = 0.0;
  bool closeness_pass = false;
  bool pass = false;
};

/// Closeness threshold as a fraction of sigma_min(X*).
inline constexpr double kClosenessFraction = 0.1;

DiagnosticsResult cmd_diagnostics(const ExperimentConfig& config);

// ---- lower-bound -----------------------------------------------------------

struct LowerBoundRow {
  std::size_t seed_index = 0;
  std::uint64_t seed = 0;
  std::size_t r = 0;
  LowerBoundResult result;
};

struct LowerBoundSummary {
  std::size_t m = 0;
  std::vector<LowerBoundRow> rows;
  std::map<std::size_t, double> certified_fraction;
  std::map<std::size_t, double> mean_achieved;
  /// mean_achieved(2r) / mean_achieved(r) for every r with 2r also present.
  std::map<std::size_t, double> doubling_ratio;
};

LowerBoundSummary cmd_lower_bound(const ExperimentConfig& config);

// ---- rip -------------------------------------------------------------------

struct RipRow {
  std::size_t m = 0;
  std::size_t seed_index = 0;
  double estimate = 0.0;
};

struct RipSummary {
  std::vector<RipRow> rows;
  std::map<std::size_t, double> mean_estimate;
  double exponent = 0.0;  // slope of log(mean estimate) vs log(m)
  double constant = 0.0;  // fitted C in C sqrt(r d / m)
  std::map<std::size_t, RipConsequenceReport> consequences;
};

RipSummary cmd_rip(const ExperimentConfig& config);

/// Least-squares slope of log(y) against log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

// ---- persistence -----------------------------------------------------------

/// Runs `kind` with `config`, writes CSV/JSON outputs under config.out and
/// returns the process exit code.
int run_experiment(ExperimentKind kind, const ExperimentConfig& config);

}  // namespace msense
