#pragma once

#include "msense/measurement.hpp"
#include "msense/recovery.hpp"
#include "msense/sym_matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace msense {

inline constexpr std::size_t kMinNetDim = 2;
inline constexpr std::size_t kMaxNetDim = 8;
inline constexpr double kNetEpsilon = 0.5;
inline constexpr std::size_t kNetRejectionLimit = 100000;

/// Finite 1/2-net of the unit sphere S^{d-1}; points are the columns.
struct EpsNet {
  std::size_t dim = 0;
  double epsilon = kNetEpsilon;
  Matrix points;  // d x N
  std::uint64_t construction_seed = 0;

  std::size_t size() const { return static_cast<std::size_t>(points.cols()); }
  Vector point(std::size_t k) const { return points.col(static_cast<Eigen::Index>(k)); }
};

/// Greedy maximal epsilon-separated set from seeded uniform sphere samples,
/// stopped after `rejection_limit` consecutive rejections. Throws RegimeError
/// outside 2 <= d <= 8.
EpsNet build_eps_net(std::size_t d, std::uint64_t seed,
                     std::size_t rejection_limit = kNetRejectionLimit);

struct NetAudit {
  double max_gap = 0.0;         // max over test vectors of the distance to the net
  double min_separation = 0.0;  // min pairwise distance inside the net
  std::size_t tests = 0;
  bool covered = false;    // max_gap <= epsilon
  bool separated = false;  // min_separation >= epsilon - 1e-9
  bool within_cardinality = false;  // N <= (3/epsilon)^d
};

/// Monte-Carlo covering audit with `tests` random unit vectors.
NetAudit audit_eps_net(const EpsNet& net, std::size_t tests, std::uint64_t seed);

struct ProjectedPair {
  SymMatrix parallel;  // <ww^T, Z> ww^T
  SymMatrix perp;      // Z - parallel
};

/// Splits Z along ww^T. Throws DimensionError for a non-unit w.
ProjectedPair project_w(const SymMatrix& z, const Vector& w);

/// Virtual operator A_w: the first m entries measure with the deflated
/// matrices A_{i,w} = A_i - <ww^T, A_i> ww^T (scaled by 1/sqrt m), entry m+1 is
/// the generalized entry <ww^T, Z>. Holds a reference to the base ensemble,
/// which must outlive it.
class VirtualOperator {
 public:
  VirtualOperator(const GoeEnsemble& base, Vector w);

  const GoeEnsemble& base() const { return *base_; }
  const Vector& direction() const { return w_; }
  /// g_i = <A_i, ww^T> = w^T A_i w.
  const Vector& generalized_entries() const { return g_; }
  const SymMatrix& projector() const { return wwt_; }

  /// A_w(Z), length m+1.
  Vector apply(const SymMatrix& z) const;
  /// A_w*(v) for v of length m+1.
  SymMatrix adjoint(const Eigen::Ref<const Vector>& v) const;
  /// A_w* A_w (Z) evaluated through the base operator and the projector
  /// identities; never materializes A_{i,w}.
  SymMatrix normal_apply(const SymMatrix& z) const;
  /// A_w*((xi, 0)) for a base-length noise vector.
  SymMatrix noise_adjoint(const Eigen::Ref<const Vector>& xi) const;

 private:
  const GoeEnsemble* base_;
  Vector w_;
  Vector g_;
  SymMatrix wwt_;
};

Vector virtual_apply(const VirtualOperator& vop, const SymMatrix& z);

struct IdentityReport {
  double residual_parallel = 0.0;
  double residual_perp = 0.0;
  double max_residual = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

/// Evaluates both projector identities for A_w* A_w directly (through
/// adjoint(apply(.))) against their closed forms in the base operator.
IdentityReport check_operator_identities(const VirtualOperator& vop, const SymMatrix& z);

struct IndependenceTerms {
  double lhs = 0.0;  // |<ww^T, A*A(P_perp(Delta))>|
  double rhs = 0.0;  // 4 sqrt(d/m) ||A(P_perp(Delta))||
};

/// Both sides of the independence inequality for one (w, Delta), with the
/// left side in operator form.
IndependenceTerms independence_terms(const VirtualOperator& vop, const SymMatrix& delta);

struct NoiseSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

struct VirtualRunConfig {
  /// nullopt: default_step_size of the real spectral initialization.
  std::optional<double> step_size;
  double step_constant = kDefaultStepConstant;
  std::size_t iterations = 50;
  std::size_t threads = 1;
};

/// Real and virtual trajectories for t = 0..T. Per-(w, t) arrays are indexed
/// w * (T + 1) + t.
struct VirtualRun {
  std::size_t dim = 0;
  std::size_t rank = 0;
  std::size_t m = 0;
  std::size_t net_size = 0;
  std::size_t iterations = 0;
  double step_size = 0.0;
  double sigma_min = 0.0;

  std::vector<double> deviation;       // ||(A*A - I)(Delta_t)||_2, Delta_t = X* - U_t U_t^T
  std::vector<double> delta_spectral;  // ||Delta_t||_2
  std::vector<double> sup_closeness;   // sup_w ||U_t U_t^T - U_{t,w} U_{t,w}^T||_F

  std::vector<double> closeness;
  std::vector<double> independence_lhs;
  std::vector<double> independence_rhs;

  std::size_t index(std::size_t w, std::size_t t) const { return w * (iterations + 1) + t; }
};

/// Runs the real iterate and one virtual iterate per net point. Throws
/// RegimeError for d > 8 and propagates DegenerateSpectrumError.
VirtualRun run_virtual_sequences(const GoeEnsemble& ens, const GroundTruth& truth, std::size_t rank,
                                 const VirtualRunConfig& config, const EpsNet& net,
                                 const std::optional<NoiseSpec>& noise = std::nullopt);

struct AuditRow {
  std::optional<std::size_t> w_index;
  std::size_t t = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
};

struct AuditReport {
  std::vector<AuditRow> rows;
  std::size_t evaluations = 0;
  std::size_t violations = 0;
  double violation_fraction = 0.0;
  double max_residual = 0.0;
  /// Decomposition audit only: evaluations skipped because the independence
  /// event failed at that t.
  std::size_t flagged = 0;
  bool pass = false;

  /// `w_index,t,lhs,rhs,margin`
  std::string to_csv() const;
};

/// Violation-fraction threshold for high-probability inequalities.
inline constexpr double kViolationThreshold = 0.01;

/// Independence inequality at every (w, t); passes iff the violation
/// fraction is at most 1%. `max_residual` is the largest lhs - rhs.
AuditReport independence_bound_audit(const VirtualRun& run);

/// Deviation decomposition at every t. Times where some w violated the
/// independence inequality are flagged, not judged. `delta` is the RIP
/// constant of order 2r+2 (or an estimate of it).
AuditReport deviation_decomposition_audit(const VirtualRun& run, double delta);

}  // namespace msense
