#pragma once

#include "msense/measurement.hpp"
#include "msense/sym_matrix.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace msense {

/// d x r optimization variable U.
using FactorMatrix = Matrix;

/// Step-size constant c in mu = c / (kappa_hat * lambda_max_hat). Largest
/// value of the sweep {0.2, 0.1, 0.05, 0.02} with no divergence over 50 seeds
/// at d=60, r=3, kappa=2, m=8640 (tools/step_pilot, configs/step_pilot.txt).
inline constexpr double kDefaultStepConstant = 0.2;

/// Relative size below which the r-th spectral eigenvalue counts as zero.
inline constexpr double kDegenerateSpectrumTol = 1e-12;

struct SpectralInit {
  FactorMatrix factor;
  /// Signed eigenvalues of the data matrix, ordered by decreasing magnitude
  /// (the r retained values).
  Vector eigenvalues;
  /// |lambda_r| == |lambda_{r+1}| up to rounding; the solver order decided.
  bool tie_at_rank = false;
};

/// Rank-r spectral factor of a symmetric data matrix: V_r diag(sqrt|lambda|)
/// over the r eigenvalues of largest magnitude. Also the identity-operator
/// hook used by tests.
SpectralInit spectral_init_from_matrix(const SymMatrix& data, std::size_t rank);

/// Stage 1: spectral factor of D = A*(y).
SpectralInit spectral_init(const GoeEnsemble& ens, const ObservationVector& y, std::size_t rank);

/// (1/4) ||y - A(U U^T)||^2
double loss(const GoeEnsemble& ens, const ObservationVector& y, const FactorMatrix& u);

/// -[A*(y - A(U U^T))] U, the gradient of `loss`.
FactorMatrix gradient(const GoeEnsemble& ens, const ObservationVector& y, const FactorMatrix& u);

/// mu = c / (kappa_hat * lambda_max_hat) with lambda_max_hat = sigma_max(U0)^2
/// and kappa_hat = sigma_max(U0)^2 / sigma_min(U0)^2.
double default_step_size(const FactorMatrix& u0, double step_constant = kDefaultStepConstant);

/// Ground truth made available to a run for oracle metrics and stopping.
struct GroundTruth {
  SymMatrix xstar;
  FactorMatrix ustar;
};

/// Flattening detector: `window` consecutive logged successive-error ratios,
/// and the drift across that whole run, inside [low, high].
struct PlateauRule {
  double low = 0.98;
  double high = 1.02;
  std::size_t window = 20;
};

struct RecoveryConfig {
  /// nullopt selects default_step_size(U0, step_constant).
  std::optional<double> step_size;
  double step_constant = kDefaultStepConstant;
  std::size_t max_iters = 5000;
  /// Oracle mode: relative Frobenius error of U U^T vs X*. Blind mode:
  /// ||grad||_F <= tol * ||U||_F * lambda_max_hat.
  double tol = 1e-6;
  std::size_t log_every = 1;
  /// Abort when loss exceeds this multiple of the initial loss.
  double divergence_factor = 1e3;
  /// Wall-clock column; off by default so trajectories are reproducible.
  bool record_wall_time = false;
  /// Oracle mode only: stop as stalled when the best relative error has not
  /// improved by `stall_ratio` within `stall_window` iterations. 0 disables.
  std::size_t stall_window = 0;
  double stall_ratio = 0.99;
  /// Oracle mode only: stop once the logged error has been flat for
  /// max(window, 10% of all logs). Used for noise-floor runs.
  std::optional<PlateauRule> plateau;

  void validate() const;
};

struct TrajectoryPoint {
  std::size_t iter = 0;
  double loss = 0.0;
  std::optional<double> err_fro;
  std::optional<double> err_spec;
  std::optional<double> dist_sq;
  double grad_norm = 0.0;
  std::optional<double> wall_ms;
};

struct TrajectoryRecord {
  std::vector<TrajectoryPoint> points;
  bool degenerate_tie = false;

  /// CSV with header `iter,loss,err_fro,err_spec,dist_sq,grad_norm,wall_ms`;
  /// absent values are empty cells.
  std::string to_csv() const;
};

enum class RecoveryStatus { kConverged, kMaxIters, kStalled, kPlateau };

std::string to_string(RecoveryStatus status);

struct RecoveryResult {
  FactorMatrix factor;
  TrajectoryRecord trajectory;
  RecoveryStatus status = RecoveryStatus::kMaxIters;
  std::size_t iterations = 0;
  double step_size = 0.0;
  SpectralInit init;
};

/// Stage 1 + Stage 2. Throws DivergenceError or DegenerateSpectrumError.
RecoveryResult run_recovery(const GoeEnsemble& ens, const ObservationVector& y, std::size_t rank,
                            const RecoveryConfig& config, const GroundTruth* oracle = nullptr);

/// Stage 2 only, from a caller-supplied U0.
RecoveryResult run_gradient_descent(const GoeEnsemble& ens, const ObservationVector& y,
                                    const FactorMatrix& u0, const RecoveryConfig& config,
                                    const GroundTruth* oracle = nullptr);

}  // namespace msense
