#include "msense/metrics.hpp"

#include "msense/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace msense {

namespace {

void require_same_shape(const Matrix& u, const Matrix& v, const char* what) {
  if (u.rows() != v.rows() || u.cols() != v.cols())
    throw DimensionError(std::string(what) + ": factor shapes differ");
}

void require_orthonormal(const Matrix& basis, const char* what) {
  const Matrix gram = basis.transpose() * basis;
  const double err = (gram - Matrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
  if (err > 1e-10) throw DimensionError(std::string(what) + ": basis is not orthonormal");
}

}  // namespace

SpectralSummary spectral_summary(const Eigen::Ref<const Matrix>& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  SpectralSummary out;
  out.singular_values = svd.singularValues();
  const double top = out.singular_values.size() ? out.singular_values(0) : 0.0;
  double smallest = top;
  for (Eigen::Index i = 0; i < out.singular_values.size(); ++i) {
    if (out.singular_values(i) > kNumericalRankTol * top) {
      ++out.rank_numerical;
      smallest = out.singular_values(i);
    }
  }
  out.condition_number = (top > 0.0) ? top / smallest : 1.0;
  return out;
}

double condition_number(const SymMatrix& x) { return spectral_summary(x.full()).condition_number; }

Matrix procrustes_rotation(const Matrix& u, const Matrix& v) {
  require_same_shape(u, v, "procrustes");
  Eigen::JacobiSVD<Matrix> svd(u.transpose() * v, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

double procrustes_dist(const Matrix& u, const Matrix& v) {
  return (u * procrustes_rotation(u, v) - v).norm();
}

ProcrustesBound procrustes_bound_check(const Matrix& u, const Matrix& v) {
  require_same_shape(u, v, "procrustes_bound_check");
  const SpectralSummary s = spectral_summary(u);
  if (s.rank_numerical < static_cast<std::size_t>(std::min(u.rows(), u.cols())))
    throw DimensionError("procrustes_bound_check: U is not full column rank");
  const double sigma_min = s.singular_values(s.singular_values.size() - 1);
  const double dist = procrustes_dist(u, v);
  const double diff = factor_error_norms(u, v).frobenius;

  ProcrustesBound out;
  out.lhs = dist * dist;
  out.rhs = diff * diff / (2.0 * (std::numbers::sqrt2 - 1.0) * sigma_min * sigma_min);
  // Absolute slack for the V = U case where both sides are rounding noise.
  out.holds = out.lhs <= out.rhs * (1.0 + 1e-10) + 1e-24;
  return out;
}

double subspace_angle(const Matrix& a_basis, const Matrix& b_basis) {
  if (a_basis.rows() != b_basis.rows()) throw DimensionError("subspace_angle: ambient dims differ");
  require_orthonormal(a_basis, "subspace_angle");
  require_orthonormal(b_basis, "subspace_angle");
  const Matrix residual = b_basis - a_basis * (a_basis.transpose() * b_basis);
  if (residual.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(residual);
  return std::min(1.0, svd.singularValues()(0));
}

DavisKahanReport davis_kahan_check(const SymMatrix& z1, const SymMatrix& z2, std::size_t rank) {
  if (z1.dim() != z2.dim()) throw DimensionError("davis_kahan_check: dims differ");
  const std::size_t d = z1.dim();
  if (rank == 0 || rank >= d) throw DimensionError("davis_kahan_check: need 1 <= r < d");
  const auto r = static_cast<Eigen::Index>(rank);

  const MagnitudeEigen e1 = eigen_by_magnitude(z1.full());
  const MagnitudeEigen e2 = eigen_by_magnitude(z2.full());
  DavisKahanReport out;
  out.gap = std::abs(e1.values(r - 1)) - std::abs(e1.values(r));
  if (!(out.gap > 0.0)) throw DegenerateSpectrumError("davis_kahan_check: zero eigen-gap");

  const Matrix u1 = e1.vectors.leftCols(r);
  const Matrix u2_perp = e2.vectors.rightCols(static_cast<Eigen::Index>(d) - r);
  const Matrix diff = z1.full() - z2.full();

  Eigen::JacobiSVD<Matrix> angle_svd(u2_perp.transpose() * u1);
  out.angle = angle_svd.singularValues()(0);
  Eigen::JacobiSVD<Matrix> pert_svd(diff * u1);
  out.bound = std::numbers::sqrt2 * pert_svd.singularValues()(0) / out.gap;

  const double pert_norm = (z1 - z2).spectral_norm();
  out.applicable = pert_norm <= (1.0 - 1.0 / std::numbers::sqrt2) * out.gap;
  out.holds = !out.applicable || out.angle <= out.bound + 1e-12;
  return out;
}

double deviation_norm(const GoeEnsemble& ens, const SymMatrix& x) {
  SymMatrix dev = ens.normal_apply(x);
  dev -= x;
  return dev.spectral_norm();
}

FactorErrorNorms factor_error_norms(const Matrix& ustar, const Matrix& u) {
  if (ustar.rows() != u.rows()) throw DimensionError("factor_error_norms: dims differ");
  const Eigen::Index a = ustar.cols();
  const Eigen::Index b = u.cols();
  Matrix stacked(u.rows(), a + b);
  stacked << ustar, u;
  // Delta = W J W^T with W = [Ustar, U], J = diag(I, -I); W = QR gives the same
  // nonzero spectrum as R J R^T.
  Eigen::HouseholderQR<Matrix> qr(stacked);
  const Eigen::Index k = std::min<Eigen::Index>(stacked.rows(), a + b);
  const Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  const Matrix small = r.leftCols(a) * r.leftCols(a).transpose() -
                       r.rightCols(b) * r.rightCols(b).transpose();
  FactorErrorNorms out;
  out.frobenius = small.norm();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(small, Eigen::EigenvaluesOnly);
  out.spectral = eig.eigenvalues().cwiseAbs().maxCoeff();
  return out;
}

}  // namespace msense
