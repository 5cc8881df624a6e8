#include "msense/recovery.hpp"

#include "msense/error.hpp"
#include "msense/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace msense {

namespace {

void require_factor(const GoeEnsemble& ens, const FactorMatrix& u) {
  if (static_cast<std::size_t>(u.rows()) != ens.dim() || u.cols() < 1)
    throw DimensionError("factor has wrong shape for this ensemble");
}

void require_observations(const GoeEnsemble& ens, const ObservationVector& y) {
  if (static_cast<std::size_t>(y.values.size()) != ens.m())
    throw DimensionError("observation length does not match m");
}

// Everything one gradient step needs, computed with two operator passes.
struct StepState {
  double loss = 0.0;
  FactorMatrix gradient;
};

StepState evaluate(const GoeEnsemble& ens, const Vector& y, const FactorMatrix& u) {
  const Vector residual = y - ens.apply(SymMatrix::gram(u));
  const SymMatrix back = ens.adjoint(residual);
  return {0.25 * residual.squaredNorm(), -(back.full() * u)};
}

void append_optional(std::ostringstream& os, const std::optional<double>& v) {
  os << ',';
  if (v) os << *v;
}

}  // namespace

SpectralInit spectral_init_from_matrix(const SymMatrix& data, std::size_t rank) {
  const std::size_t d = data.dim();
  if (rank < 1 || rank > d) throw DimensionError("spectral_init: need 1 <= r <= d");
  const auto r = static_cast<Eigen::Index>(rank);
  const MagnitudeEigen eig = eigen_by_magnitude(data.full());

  const double lead = std::abs(eig.values(0));
  const double last = std::abs(eig.values(r - 1));
  if (!(last > kDegenerateSpectrumTol * lead))
    throw DegenerateSpectrumError("spectral_init: r-th eigenvalue of the data matrix is zero");

  SpectralInit out;
  out.eigenvalues = eig.values.head(r);
  out.factor = eig.vectors.leftCols(r) * eig.values.head(r).cwiseAbs().cwiseSqrt().asDiagonal();
  if (rank < d) {
    const double next = std::abs(eig.values(r));
    out.tie_at_rank = std::abs(last - next) <= 1e-12 * lead;
  }
  return out;
}

SpectralInit spectral_init(const GoeEnsemble& ens, const ObservationVector& y, std::size_t rank) {
  require_observations(ens, y);
  return spectral_init_from_matrix(ens.adjoint(y.values), rank);
}

double loss(const GoeEnsemble& ens, const ObservationVector& y, const FactorMatrix& u) {
  require_observations(ens, y);
  require_factor(ens, u);
  return 0.25 * (y.values - ens.apply(SymMatrix::gram(u))).squaredNorm();
}

FactorMatrix gradient(const GoeEnsemble& ens, const ObservationVector& y, const FactorMatrix& u) {
  require_observations(ens, y);
  require_factor(ens, u);
  return evaluate(ens, y.values, u).gradient;
}

double default_step_size(const FactorMatrix& u0, double step_constant) {
  if (!(step_constant > 0.0)) throw ConfigError("step constant must be positive");
  Eigen::JacobiSVD<Matrix> svd(u0);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || !(s(0) > 0.0) || !(s(s.size() - 1) > kNumericalRankTol * s(0)))
    throw DegenerateSpectrumError("default_step_size: U0 is rank deficient");
  const double lambda_max = s(0) * s(0);
  const double kappa = lambda_max / (s(s.size() - 1) * s(s.size() - 1));
  return step_constant / (kappa * lambda_max);
}

void RecoveryConfig::validate() const {
  if (step_size && !(*step_size >= 0.0)) throw ConfigError("step_size must be nonnegative");
  if (!(step_constant > 0.0)) throw ConfigError("step_constant must be positive");
  if (!(tol > 0.0)) throw ConfigError("tol must be positive");
  if (max_iters < 1) throw ConfigError("max_iters must be at least 1");
  if (log_every < 1) throw ConfigError("log_every must be at least 1");
  if (!(divergence_factor > 1.0)) throw ConfigError("divergence_factor must exceed 1");
}

std::string TrajectoryRecord::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "iter,loss,err_fro,err_spec,dist_sq,grad_norm,wall_ms\n";
  for (const auto& p : points) {
    os << p.iter << ',' << p.loss;
    append_optional(os, p.err_fro);
    append_optional(os, p.err_spec);
    append_optional(os, p.dist_sq);
    os << ',' << p.grad_norm;
    append_optional(os, p.wall_ms);
    os << '\n';
  }
  return os.str();
}

std::string to_string(RecoveryStatus status) {
  switch (status) {
    case RecoveryStatus::kConverged: return "converged";
    case RecoveryStatus::kMaxIters: return "max_iters";
    case RecoveryStatus::kStalled: return "stalled";
    case RecoveryStatus::kPlateau: return "plateau";
  }
  return "unknown";
}

RecoveryResult run_gradient_descent(const GoeEnsemble& ens, const ObservationVector& y,
                                    const FactorMatrix& u0, const RecoveryConfig& config,
                                    const GroundTruth* oracle) {
  config.validate();
  require_observations(ens, y);
  require_factor(ens, u0);
  if (oracle && (oracle->xstar.dim() != ens.dim() || oracle->ustar.rows() != u0.rows()))
    throw DimensionError("oracle dimensions do not match the ensemble");

  Eigen::JacobiSVD<Matrix> init_svd(u0);
  const double lambda_max_hat = init_svd.singularValues()(0) * init_svd.singularValues()(0);

  RecoveryResult result;
  result.step_size = config.step_size ? *config.step_size
                                      : default_step_size(u0, config.step_constant);
  const double mu = result.step_size;
  const double xstar_norm = oracle ? oracle->xstar.frobenius_norm() : 0.0;

  const auto clock_start = std::chrono::steady_clock::now();
  FactorMatrix u = u0;
  StepState state = evaluate(ens, y.values, u);
  const double initial_loss = state.loss;

  double best_rel = std::numeric_limits<double>::infinity();
  std::size_t best_iter = 0;
  std::size_t flat_run = 0;
  std::vector<double> logged_errs;

  for (std::size_t t = 0;; ++t) {
    // An exact start (initial loss 0) has no scale to diverge against.
    const bool blown_up = initial_loss > 0.0 && state.loss > config.divergence_factor * initial_loss;
    if (!std::isfinite(state.loss) || blown_up)
      throw DivergenceError("loss exceeded " + std::to_string(config.divergence_factor) +
                            "x its initial value at iteration " + std::to_string(t));

    const double grad_norm = state.gradient.norm();
    std::optional<double> rel_err;
    FactorErrorNorms norms;
    if (oracle) {
      norms = factor_error_norms(oracle->ustar, u);
      rel_err = xstar_norm > 0.0 ? norms.frobenius / xstar_norm : norms.frobenius;
    }

    bool stop = false;
    if (oracle) {
      if (*rel_err <= config.tol) {
        result.status = RecoveryStatus::kConverged;
        stop = true;
      }
    } else if (grad_norm <= config.tol * u.norm() * lambda_max_hat) {
      result.status = RecoveryStatus::kConverged;
      stop = true;
    }
    if (!stop && t >= config.max_iters) {
      result.status = RecoveryStatus::kMaxIters;
      stop = true;
    }
    if (!stop && oracle && config.stall_window > 0) {
      if (*rel_err < config.stall_ratio * best_rel) {
        best_rel = *rel_err;
        best_iter = t;
      } else if (t - best_iter >= config.stall_window) {
        result.status = RecoveryStatus::kStalled;
        stop = true;
      }
    }

    const bool log_now = (t % config.log_every == 0) || stop;
    if (log_now) {
      TrajectoryPoint p;
      p.iter = t;
      p.loss = state.loss;
      p.grad_norm = grad_norm;
      if (oracle) {
        p.err_fro = norms.frobenius;
        p.err_spec = norms.spectral;
        const double dist = procrustes_dist(u, oracle->ustar);
        p.dist_sq = dist * dist;
      }
      if (config.record_wall_time)
        p.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                               clock_start)
                        .count();
      result.trajectory.points.push_back(p);

      if (!stop && oracle && config.plateau) {
        const PlateauRule& rule = *config.plateau;
        if (!logged_errs.empty() && logged_errs.back() > 0.0) {
          const double ratio = norms.frobenius / logged_errs.back();
          flat_run = (ratio >= rule.low && ratio <= rule.high) ? flat_run + 1 : 0;
        }
        logged_errs.push_back(norms.frobenius);
        // Slow geometric decay also has successive ratios near 1, so the drift
        // across the last `window` logs must stay inside the band too.
        bool run_flat = false;
        if (logged_errs.size() > rule.window) {
          const double before = logged_errs[logged_errs.size() - 1 - rule.window];
          const double drift = before > 0.0 ? norms.frobenius / before : 0.0;
          run_flat = drift >= rule.low && drift <= rule.high;
        }
        const std::size_t logs = logged_errs.size();
        if (flat_run >= rule.window && run_flat && 10 * flat_run >= logs) {
          result.status = RecoveryStatus::kPlateau;
          stop = true;
        }
      }
    }

    if (stop) {
      result.iterations = t;
      break;
    }

    u -= mu * state.gradient;
    state = evaluate(ens, y.values, u);
  }

  result.factor = std::move(u);
  return result;
}

RecoveryResult run_recovery(const GoeEnsemble& ens, const ObservationVector& y, std::size_t rank,
                            const RecoveryConfig& config, const GroundTruth* oracle) {
  config.validate();
  SpectralInit init = spectral_init(ens, y, rank);
  RecoveryResult result = run_gradient_descent(ens, y, init.factor, config, oracle);
  result.trajectory.degenerate_tie = init.tie_at_rank;
  result.init = std::move(init);
  return result;
}

}  // namespace msense
