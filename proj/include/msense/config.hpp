#pragma once

#include "msense/measurement.hpp"
#include "msense/recovery.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace msense {

enum class ExperimentKind { kRecover, kPhase, kNoiseFloor, kDiagnostics, kLowerBound, kRip };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

enum class SpectrumPolicy { kLogSpaced, kLinear };

/// Every knob of every experiment. Commands read the fields they need and
/// ignore the rest; the parser rejects keys that are not listed here.
struct ExperimentConfig {
  std::optional<ExperimentKind> kind;

  // Instance.
  std::size_t d = 60;
  std::size_t r = 3;
  std::vector<std::size_t> r_list;
  double kappa = 2.0;
  double sigma0 = 1.0;
  SpectrumPolicy spectrum = SpectrumPolicy::kLogSpaced;

  // Noise. `sigma` is absolute; `sigma_list` entries are multiples of
  // sigma_min / sqrt(d).
  double sigma = 0.0;
  std::vector<double> sigma_list;

  // Samples. `m` wins over `m_factor` (m = m_factor * r * d * kappa^2).
  std::optional<std::size_t> m;
  double m_factor = 8.0;
  std::vector<std::size_t> m_list;
  std::size_t m_grid_points = 12;
  double m_grid_low = 1.0;    // grid starts at m_grid_low * r * d
  double m_grid_high = 40.0;  // grid ends at m_grid_high * r * d * kappa^2
  std::size_t bisection_steps = 6;
  StorageMode storage = StorageMode::kMaterialized;

  // Trials and seeds.
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  std::uint64_t net_seed = 7;
  std::size_t threads = 1;

  // Step and stopping policy.
  std::optional<double> step_size;
  double step_constant = kDefaultStepConstant;
  std::size_t max_iters = 5000;
  double tol = 1e-6;
  std::size_t log_every = 1;
  bool blind = false;
  std::size_t stall_window = 0;
  double success_tol = 1e-4;
  double success_rate = 0.9;
  double plateau_low = 0.98;
  double plateau_high = 1.02;
  std::size_t plateau_window = 20;
  bool timing = false;

  // Diagnostics.
  std::size_t iterations = 50;
  std::size_t identity_checks = 5;
  std::size_t rip_probes = 200;
  bool rip_refine = true;
  std::string audit_rows = "first";  // first | all | none

  // RIP command.
  std::size_t consequence_trials = 0;

  std::string out = "out";

  /// m for a rank-r run under the `m` / `m_factor` rule.
  std::size_t samples_for(std::size_t rank) const;
  /// r_list if set, otherwise {r}.
  std::vector<std::size_t> ranks() const;
};

/// Parses the flat `key = value` format. '#' starts a comment; lists are
/// comma separated. Unknown keys, malformed values and duplicate keys throw
/// ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Canonical key/value echo (sorted keys, every field) used in run metadata;
/// parse_config(render_config(c)) reproduces c.
std::map<std::string, std::string> config_entries(const ExperimentConfig& config);
std::string render_config(const ExperimentConfig& config);

}  // namespace msense
