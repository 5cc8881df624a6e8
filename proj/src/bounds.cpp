#include "msense/bounds.hpp"

#include "msense/counter_rng.hpp"
#include "msense/error.hpp"

#include <algorithm>
#include <cmath>

namespace msense {

namespace {

double isometry_gap(const GoeEnsemble& ens, const SymMatrix& z) {
  return std::abs(ens.apply(z).squaredNorm() - 1.0);
}

SymMatrix truncate_to_rank(const SymMatrix& z, std::size_t rank) {
  const MagnitudeEigen eig = eigen_by_magnitude(z.full());
  const auto r = static_cast<Eigen::Index>(rank);
  const Matrix v = eig.vectors.leftCols(r);
  return SymMatrix::from_upper(v * eig.values.head(r).asDiagonal() * v.transpose());
}

Matrix random_orthonormal(CounterRng& rng, std::size_t d, std::size_t k) {
  Matrix g(d, k);
  for (Eigen::Index j = 0; j < g.cols(); ++j)
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(d, k);
}

}  // namespace

SymMatrix rip_probe(std::size_t d, std::size_t rank, std::size_t draw_rank,
                    std::uint64_t probe_seed, std::size_t probe_index) {
  if (rank < 1 || rank > draw_rank || draw_rank > d)
    throw DimensionError("rip_probe: need 1 <= rank <= draw_rank <= d");
  CounterRng frame_rng(probe_seed, 2 * static_cast<std::uint64_t>(probe_index));
  CounterRng weight_rng(probe_seed, 2 * static_cast<std::uint64_t>(probe_index) + 1);
  // Column-major draws and Householder QR: the first k columns of the frame
  // depend only on the first k Gaussian columns, which makes probes nested.
  const Matrix frame = random_orthonormal(frame_rng, d, draw_rank);
  Vector weights(draw_rank);
  for (auto& s : weights) s = weight_rng.normal();

  const auto r = static_cast<Eigen::Index>(rank);
  const Vector head = weights.head(r) / weights.head(r).norm();
  const Matrix v = frame.leftCols(r);
  return SymMatrix::from_upper(v * head.asDiagonal() * v.transpose());
}

RipEstimate estimate_rip(const GoeEnsemble& ens, std::size_t rank, std::size_t probes, bool refine,
                         std::uint64_t probe_seed, const RipOptions& options) {
  const std::size_t d = ens.dim();
  if (rank < 1 || rank > d) throw DimensionError("estimate_rip: need 1 <= r <= d");

  RipEstimate out;
  out.rank = rank;
  out.probe_count = probes;
  SymMatrix best;
  double best_gap = -1.0;
  for (std::size_t k = 0; k < probes; ++k) {
    for (std::size_t q = 1; q <= rank; ++q) {
      SymMatrix z = rip_probe(d, q, rank, probe_seed, k);
      const double gap = isometry_gap(ens, z);
      if (gap > best_gap) {
        best_gap = gap;
        best = std::move(z);
      }
    }
  }
  out.lower_estimate = std::max(0.0, best_gap);

  if (refine && best_gap >= 0.0) {
    out.ascent_refined = true;
    SymMatrix z = best;
    const double direction = ens.apply(z).squaredNorm() >= 1.0 ? 1.0 : -1.0;
    for (std::size_t step = 0; step < options.ascent_steps; ++step) {
      SymMatrix grad = ens.normal_apply(z);
      grad -= z;
      const double norm = grad.frobenius_norm();
      if (!(norm > 0.0)) break;
      z.axpy(direction * options.ascent_step / norm, grad);
      z = truncate_to_rank(z, rank);
      const double fro = z.frobenius_norm();
      if (!(fro > 0.0)) break;
      z *= 1.0 / fro;
      out.lower_estimate = std::max(out.lower_estimate, isometry_gap(ens, z));
    }
  }
  return out;
}

double rip_surrogate(std::size_t order, std::size_t d, std::size_t m, double constant) {
  return constant * std::sqrt(static_cast<double>(order) * static_cast<double>(d) /
                              static_cast<double>(m));
}

double fit_rip_constant(std::size_t rank, std::size_t d,
                        const std::vector<std::pair<std::size_t, double>>& m_and_estimate) {
  double xy = 0.0;
  double xx = 0.0;
  for (const auto& [m, estimate] : m_and_estimate) {
    const double x = std::sqrt(static_cast<double>(rank * d) / static_cast<double>(m));
    xy += x * estimate;
    xx += x * x;
  }
  if (!(xx > 0.0)) throw ConfigError("fit_rip_constant needs at least one point");
  return xy / xx;
}

double rip_cross_term_scalar(const GoeEnsemble& ens, const Vector& w, const SymMatrix& z) {
  const SymMatrix wwt = SymMatrix::outer(w);
  SymMatrix perp = z;
  perp.axpy(-z.quadratic_form(w), wwt);
  double acc = 0.0;
  for (std::size_t i = 0; i < ens.m(); ++i) {
    const SymMatrix a = ens.matrix(i);
    acc += a.quadratic_form(w) * a.dot(perp);
  }
  return std::abs(acc / static_cast<double>(ens.m()));
}

RipConsequenceReport rip_consequence_check(const GoeEnsemble& ens, std::size_t rank,
                                           std::size_t trials, std::uint64_t seed,
                                           double constant) {
  const std::size_t d = ens.dim();
  const std::size_t m = ens.m();
  if (rank < 1 || rank > d) throw DimensionError("rip_consequence_check: need 1 <= r <= d");
  const double delta_frobenius = rip_surrogate(std::min(3 * rank, d), d, m, constant);
  const double delta_spectral = rip_surrogate(std::min(rank + 2, d), d, m, constant);

  RipConsequenceReport out;
  out.trials = trials;
  out.in_regime = m >= 64 * rank * d;
  std::size_t ok_frobenius = 0, ok_spectral = 0, ok_cross = 0;
  for (std::size_t k = 0; k < trials; ++k) {
    const SymMatrix z = rip_probe(d, rank, rank, derive_seed(seed, 0), k);
    CounterRng rng(derive_seed(seed, 1), k);
    const Matrix v = random_orthonormal(rng, d, rank);
    const Matrix wm = random_orthonormal(rng, d, 1);
    const Vector w = wm.col(0);

    SymMatrix residual = z;
    residual -= ens.normal_apply(z);
    const double z_norm = z.frobenius_norm();
    const double lhs_frobenius = (residual.full() * v).norm();
    const double lhs_spectral = residual.spectral_norm();
    const SymMatrix wwt = SymMatrix::outer(w);
    SymMatrix perp = z;
    perp.axpy(-z.quadratic_form(w), wwt);
    const double lhs_cross = std::abs(ens.apply(wwt).dot(ens.apply(perp)));

    const double rf = lhs_frobenius / (delta_frobenius * z_norm);
    const double rs = lhs_spectral / (delta_spectral * z_norm);
    const double rc = lhs_cross / (delta_spectral * z_norm);
    ok_frobenius += rf <= 1.0;
    ok_spectral += rs <= 1.0;
    ok_cross += rc <= 1.0;
    out.max_ratio_frobenius = std::max(out.max_ratio_frobenius, rf);
    out.max_ratio_spectral = std::max(out.max_ratio_spectral, rs);
    out.max_ratio_cross = std::max(out.max_ratio_cross, rc);
  }
  if (trials > 0) {
    const double n = static_cast<double>(trials);
    out.fraction_frobenius = ok_frobenius / n;
    out.fraction_spectral = ok_spectral / n;
    out.fraction_cross = ok_cross / n;
  } else {
    out.fraction_frobenius = out.fraction_spectral = out.fraction_cross = 1.0;
  }
  const double worst = std::min({out.fraction_frobenius, out.fraction_spectral, out.fraction_cross});
  out.pass = worst >= 0.99;
  return out;
}

LowerBoundResult lower_bound_construct(const GoeEnsemble& ens, std::size_t rank) {
  const std::size_t d = ens.dim();
  const std::size_t m = ens.m();
  if (d < 6) throw RegimeError("lower_bound_construct requires d >= 6");
  if (rank < 1 || 16 * rank > d) throw RegimeError("lower_bound_construct requires 1 <= r <= d/16");
  if (m < kLowerBoundMinSamples)
    throw RegimeError("lower_bound_construct requires m >= " +
                      std::to_string(kLowerBoundMinSamples));

  Vector u = Vector::Zero(d);
  u(d - 1) = 1.0;
  const SymMatrix uut = SymMatrix::outer(u);
  // (1/m) sum_i <A_i, uu^T> A_i
  const Vector g = ens.inner_products(uut);
  const Matrix weighted = ens.adjoint(g / std::sqrt(static_cast<double>(m))).full();

  const auto n = static_cast<Eigen::Index>(d - 1);
  const auto r = static_cast<Eigen::Index>(rank);
  const MagnitudeEigen eig = eigen_by_magnitude(weighted.topLeftCorner(n, n));
  Matrix z_full = Matrix::Zero(d, d);
  for (Eigen::Index k = 0; k < r; ++k) {
    const double sign = eig.values(k) >= 0.0 ? 1.0 : -1.0;
    z_full.topLeftCorner(n, n) += sign * eig.vectors.col(k) * eig.vectors.col(k).transpose();
  }

  LowerBoundResult out;
  out.z = SymMatrix::symmetrized(z_full);
  SymMatrix deviation = ens.normal_apply(out.z);
  deviation -= out.z;
  out.achieved = std::abs(deviation.quadratic_form(u));
  out.bound = std::sqrt(static_cast<double>(rank * rank * d) / static_cast<double>(m)) / 16.0;
  out.certified = out.achieved >= out.bound;

  // Rows ceil((d-1)/2)..(d-1) and columns 1..r of the reduced matrix (1-based).
  const Eigen::Index first_row = (n + 1) / 2 - 1;
  const Matrix block = weighted.block(first_row, 0, n - first_row, r);
  Eigen::JacobiSVD<Matrix> svd(block);
  out.block_value = svd.singularValues().head(std::min<Eigen::Index>(r, block.cols())).sum();
  return out;
}

LowerBoundResult lower_bound_construct(std::size_t m, std::size_t d, std::uint64_t seed,
                                       std::size_t rank) {
  if (d < 6) throw RegimeError("lower_bound_construct requires d >= 6");
  if (rank < 1 || 16 * rank > d) throw RegimeError("lower_bound_construct requires 1 <= r <= d/16");
  if (m < kLowerBoundMinSamples)
    throw RegimeError("lower_bound_construct requires m >= " +
                      std::to_string(kLowerBoundMinSamples));
  return lower_bound_construct(GoeEnsemble::sample(m, d, seed), rank);
}

}  // namespace msense
