#pragma once

#include "msense/measurement.hpp"
#include "msense/sym_matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

namespace msense {

/// C in the RIP surrogate delta_k ~ C sqrt(k d / m), least-squares fit of the
/// estimator output on the (d=16, r=2) grid of configs/rip_calibration.cfg.
/// Refresh with `sense rip --config configs/rip_calibration.cfg`.
inline constexpr double kRipSurrogateConstant = 2.014;

/// Smallest m accepted by lower_bound_construct.
inline constexpr std::size_t kLowerBoundMinSamples = 16;

struct RipEstimate {
  std::size_t rank = 0;
  /// max |‖A(Z)‖² - 1| over every unit-Frobenius probe evaluated; a lower
  /// bound on delta_r.
  double lower_estimate = 0.0;
  std::size_t probe_count = 0;
  bool ascent_refined = false;
};

struct RipOptions {
  std::size_t ascent_steps = 100;
  double ascent_step = 0.1;
};

/// Random rank-<=r probes V diag(s) V^T / ‖s‖. Probe k evaluates all leading
/// truncations (ranks 1..r) of one draw from stream (probe_seed, k), so the
/// rank-(r+1) probe set contains the rank-r set. With `refine`, the best probe
/// seeds a projected gradient ascent on the rank-r unit sphere.
RipEstimate estimate_rip(const GoeEnsemble& ens, std::size_t rank, std::size_t probes, bool refine,
                         std::uint64_t probe_seed, const RipOptions& options = {});

/// The unit-Frobenius probe matrix of rank `rank` from draw `probe_index`.
SymMatrix rip_probe(std::size_t d, std::size_t rank, std::size_t draw_rank,
                    std::uint64_t probe_seed, std::size_t probe_index);

/// C sqrt(order d / m)
double rip_surrogate(std::size_t order, std::size_t d, std::size_t m,
                     double constant = kRipSurrogateConstant);

/// Least-squares fit of estimate = C sqrt(r d / m) through the origin.
double fit_rip_constant(std::size_t rank, std::size_t d,
                        const std::vector<std::pair<std::size_t, double>>& m_and_estimate);

struct RipConsequenceReport {
  std::size_t trials = 0;
  /// Fraction of trials within the surrogate for each inequality.
  double fraction_frobenius = 0.0;  // ‖(I - A*A)(Z) V‖_F <= delta_{r+2r'} ‖Z‖_F
  double fraction_spectral = 0.0;   // ‖(I - A*A)(Z)‖ <= delta_{r+2} ‖Z‖_F
  double fraction_cross = 0.0;      // |<A(ww^T), A(P_perp Z)>| <= delta_{r+2} ‖Z‖_F
  double max_ratio_frobenius = 0.0;
  double max_ratio_spectral = 0.0;
  double max_ratio_cross = 0.0;
  /// m >= 64 r d; below that the fractions are informational only.
  bool in_regime = false;
  bool pass = false;
};

/// Random rank-r Z, orthonormal V with r' = r columns and unit w per trial.
RipConsequenceReport rip_consequence_check(const GoeEnsemble& ens, std::size_t rank,
                                           std::size_t trials, std::uint64_t seed,
                                           double constant = kRipSurrogateConstant);

/// |<A(ww^T), A(P_perp Z)>| computed as (1/m) sum_i <A_i, ww^T><A_i, P_perp Z>.
double rip_cross_term_scalar(const GoeEnsemble& ens, const Vector& w, const SymMatrix& z);

struct LowerBoundResult {
  /// |u^T [(A*A - I)(Z)] u| for the constructed Z.
  double achieved = 0.0;
  /// (1/16) sqrt(r^2 d / m)
  double bound = 0.0;
  /// Sum of the top-r singular values of the lower-left block of the
  /// weighted matrix; never exceeds `achieved`.
  double block_value = 0.0;
  bool certified = false;
  SymMatrix z;
};

/// Adversarial Z in T_r with Zu = 0 for u = e_d: the signed top-r eigenprojector
/// of the weighted matrix (1/m) sum_i (A_i)_{dd} A_i with its last row and column
/// removed. Throws RegimeError unless d >= 6, 16 r <= d and m >= 16.
LowerBoundResult lower_bound_construct(std::size_t m, std::size_t d, std::uint64_t seed,
                                       std::size_t rank);

/// Same construction on an existing ensemble.
LowerBoundResult lower_bound_construct(const GoeEnsemble& ens, std::size_t rank);

}  // namespace msense
