#pragma once

#include "msense/measurement.hpp"
#include "msense/sym_matrix.hpp"

#include <cstddef>

namespace msense {

/// Singular values above this fraction of sigma_max count as nonzero.
inline constexpr double kNumericalRankTol = 1e-10;

struct SpectralSummary {
  Vector singular_values;  // descending
  double condition_number = 1.0;
  std::size_t rank_numerical = 0;
};

SpectralSummary spectral_summary(const Eigen::Ref<const Matrix>& m);
/// sigma_max / sigma_min over the nonzero spectrum.
double condition_number(const SymMatrix& x);

/// min over orthogonal R of ||U R - V||_F, via the polar factor of U^T V.
double procrustes_dist(const Matrix& u, const Matrix& v);
/// The minimizing rotation R.
Matrix procrustes_rotation(const Matrix& u, const Matrix& v);

struct ProcrustesBound {
  double lhs = 0.0;  // dist^2(U, V)
  double rhs = 0.0;  // ||UU^T - VV^T||_F^2 / (2 (sqrt2 - 1) sigma_min^2(U))
  bool holds = true;
};

/// Throws DimensionError when U is not full column rank.
ProcrustesBound procrustes_bound_check(const Matrix& u, const Matrix& v);

/// ||(I - A A^T) B||_2 for orthonormal bases A (d x k) and B (d x j): the sine
/// of the largest principal angle. Throws on non-orthonormal input.
double subspace_angle(const Matrix& a_basis, const Matrix& b_basis);

struct DavisKahanReport {
  double angle = 0.0;  // ||U_{2,r,perp}^T U_{1,r}||
  double bound = 0.0;  // sqrt2 ||(Z1 - Z2) U_{1,r}|| / gap
  double gap = 0.0;    // |lambda_r(Z1)| - |lambda_{r+1}(Z1)|
  bool applicable = false;
  bool holds = true;
};

/// Spectral-norm sin-theta check with magnitude-ordered eigenvalues.
DavisKahanReport davis_kahan_check(const SymMatrix& z1, const SymMatrix& z2, std::size_t rank);

/// ||A*(A(X)) - X||_2
double deviation_norm(const GoeEnsemble& ens, const SymMatrix& x);

struct FactorErrorNorms {
  double frobenius = 0.0;
  double spectral = 0.0;
};

/// Frobenius and spectral norms of Ustar Ustar^T - U U^T without forming the
/// d x d difference (works in the span of [Ustar, U]).
FactorErrorNorms factor_error_norms(const Matrix& ustar, const Matrix& u);

}  // namespace msense
