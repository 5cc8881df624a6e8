#include "msense/error.hpp"
#include "msense/experiments.hpp"
#include "msense/metrics.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <numbers>

namespace msense {
namespace {

using testing::random_matrix;
using testing::random_orthogonal;

TEST(ProcrustesDist, ZeroForSameAndRotated) {
  CounterRng rng(1, 0);
  const Matrix u = random_matrix(rng, 8, 3);
  EXPECT_NEAR(procrustes_dist(u, u), 0.0, 1e-12);
  EXPECT_NEAR(procrustes_dist(u, u * random_orthogonal(rng, 3)), 0.0, 1e-10);
}

TEST(ProcrustesDist, RankOneMatchesSignEnumeration) {
  CounterRng rng(2, 0);
  for (int k = 0; k < 100; ++k) {
    const Matrix u = random_matrix(rng, 6, 1), v = random_matrix(rng, 6, 1);
    const double oracle = std::min((u - v).norm(), (u + v).norm());
    EXPECT_NEAR(procrustes_dist(u, v), oracle, 1e-12 * (1 + oracle));
  }
}

TEST(ProcrustesDist, Symmetric) {
  CounterRng rng(3, 0);
  for (int k = 0; k < 50; ++k) {
    const Matrix u = random_matrix(rng, 7, 3), v = random_matrix(rng, 7, 3);
    EXPECT_NEAR(procrustes_dist(u, v), procrustes_dist(v, u), 1e-10);
  }
}

TEST(ProcrustesDist, ClosedFormNeverAboveRotationSearch) {
  CounterRng rng(4, 0);
  const Matrix u = random_matrix(rng, 6, 2), v = random_matrix(rng, 6, 2);
  const double closed = procrustes_dist(u, v);
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 10000; ++k) best = std::min(best, (u * random_orthogonal(rng, 2) - v).norm());
  EXPECT_LE(closed * closed, best * best + 1e-8);
  // The search should get close to the optimum in two dimensions.
  EXPECT_LT(best - closed, 1e-2);
}

TEST(ProcrustesDist, RotationIsOrthogonal) {
  CounterRng rng(5, 0);
  const Matrix r = procrustes_rotation(random_matrix(rng, 9, 4), random_matrix(rng, 9, 4));
  EXPECT_LT((r.transpose() * r - Matrix::Identity(4, 4)).norm(), 1e-12);
}

TEST(ProcrustesBound, HoldsOnRandomPairs) {
  CounterRng rng(6, 0);
  for (int k = 0; k < 1000; ++k) {
    const Matrix u = random_matrix(rng, 12, 3);
    const Matrix v = random_matrix(rng, 12, 3);
    const ProcrustesBound b = procrustes_bound_check(u, v);
    ASSERT_TRUE(b.holds) << "pair " << k << ": " << b.lhs << " > " << b.rhs;
  }
}

TEST(ProcrustesBound, ValuesMatchDefinitions) {
  CounterRng rng(7, 0);
  const Matrix u = random_matrix(rng, 8, 2), v = random_matrix(rng, 8, 2);
  const ProcrustesBound b = procrustes_bound_check(u, v);
  const double smin = u.jacobiSvd().singularValues()(1);
  const double diff = (u * u.transpose() - v * v.transpose()).squaredNorm();
  EXPECT_NEAR(b.rhs, diff / (2 * (std::numbers::sqrt2 - 1) * smin * smin), 1e-10 * b.rhs);
  EXPECT_NEAR(b.lhs, std::pow(procrustes_dist(u, v), 2), 1e-10 * (1 + b.lhs));
}

TEST(ProcrustesBound, IdenticalAndRankDeficient) {
  CounterRng rng(8, 0);
  const Matrix u = random_matrix(rng, 8, 2);
  const ProcrustesBound same = procrustes_bound_check(u, u);
  EXPECT_NEAR(same.lhs, 0.0, 1e-20);
  EXPECT_TRUE(same.holds);
  Matrix deficient = u;
  deficient.col(1) = deficient.col(0);
  EXPECT_THROW(procrustes_bound_check(deficient, u), DimensionError);
}

TEST(ProcrustesBound, NearTightnessProbeIsFinite) {
  // Perturbation orthogonal to U's column space; the ratio is informational.
  CounterRng rng(9, 0);
  const Matrix u = random_matrix(rng, 10, 2);
  const Matrix q = u.householderQr().householderQ();
  const Matrix perp = q.rightCols(8) * random_matrix(rng, 8, 2);
  const ProcrustesBound b = procrustes_bound_check(u, u + 1e-3 * perp);
  EXPECT_TRUE(b.holds);
  EXPECT_GT(b.lhs / b.rhs, 0.0);
  EXPECT_LE(b.lhs / b.rhs, 1.0);
}

TEST(SubspaceAngle, Basics) {
  Matrix e1 = Matrix::Zero(3, 1), mixed = Matrix::Zero(3, 1), e2 = Matrix::Zero(3, 1);
  e1(0, 0) = 1.0;
  e2(1, 0) = 1.0;
  mixed(0, 0) = mixed(1, 0) = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(subspace_angle(e1, e1), 0.0, 1e-15);
  EXPECT_NEAR(subspace_angle(e1, e2), 1.0, 1e-15);
  EXPECT_NEAR(subspace_angle(e1, mixed), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_THROW(subspace_angle(2.0 * e1, e2), DimensionError);
}

TEST(SubspaceAngle, MatchesPrincipalAngleOracle) {
  // sin of the largest principal angle from the smallest singular value of A^T B.
  CounterRng rng(10, 0);
  for (int k = 0; k < 20; ++k) {
    const Matrix a = testing::orthonormal_frame(rng, 7, 3), b = testing::orthonormal_frame(rng, 7, 3);
    const double cos_min = (a.transpose() * b).jacobiSvd().singularValues().minCoeff();
    EXPECT_NEAR(subspace_angle(a, b), std::sqrt(std::max(0.0, 1 - cos_min * cos_min)), 1e-10);
  }
}

// Z1 with r dominant eigenvalues (random signs) and a clear gap to the rest.
SymMatrix gapped_matrix(CounterRng& rng, std::size_t d, std::size_t r) {
  const Matrix q = random_orthogonal(rng, static_cast<Eigen::Index>(d));
  Vector lambda(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double mag = i < r ? 3.0 + rng.uniform() : rng.uniform();
    lambda(i) = rng.uniform() < 0.5 ? -mag : mag;
  }
  return SymMatrix::from_upper(q * lambda.asDiagonal() * q.transpose());
}

TEST(DavisKahan, IdenticalInputs) {
  CounterRng rng(11, 0);
  const SymMatrix z = gapped_matrix(rng, 10, 2);
  const DavisKahanReport rep = davis_kahan_check(z, z, 2);
  EXPECT_TRUE(rep.applicable);
  EXPECT_NEAR(rep.angle, 0.0, 1e-12);
  EXPECT_TRUE(rep.holds);
}

TEST(DavisKahan, HoldsInPreconditionRegime) {
  CounterRng rng(12, 0);
  for (int k = 0; k < 500; ++k) {
    const SymMatrix z1 = gapped_matrix(rng, 10, 2);
    const MagnitudeEigen eig = eigen_by_magnitude(z1.full());
    const double gap = std::abs(eig.values(1)) - std::abs(eig.values(2));
    SymMatrix e = testing::random_symmetric(rng, 10);
    e *= rng.uniform() * (1 - 1 / std::numbers::sqrt2) * gap / e.spectral_norm();
    const DavisKahanReport rep = davis_kahan_check(z1, z1 + e, 2);
    ASSERT_TRUE(rep.applicable) << k;
    ASSERT_TRUE(rep.holds) << k << ": angle " << rep.angle << " bound " << rep.bound;
  }
}

TEST(DavisKahan, OutsidePreconditionMakesNoClaim) {
  CounterRng rng(13, 0);
  const SymMatrix z1 = gapped_matrix(rng, 10, 2);
  SymMatrix e = testing::random_symmetric(rng, 10);
  e *= 50.0 / e.spectral_norm();
  const DavisKahanReport rep = davis_kahan_check(z1, z1 + e, 2);
  EXPECT_FALSE(rep.applicable);
  EXPECT_TRUE(rep.holds);
}

TEST(DavisKahan, ZeroGapRejected) {
  Matrix diag = Vector{{2.0, -2.0, 1.0}}.asDiagonal();
  const SymMatrix z = SymMatrix::from_upper(diag);
  EXPECT_THROW(davis_kahan_check(z, z, 1), DegenerateSpectrumError);
}

TEST(DeviationNorm, ZeroAndDirectRecomputation) {
  const GoeEnsemble ens = GoeEnsemble::sample(30, 5, 3);
  EXPECT_EQ(deviation_norm(ens, SymMatrix(5)), 0.0);
  CounterRng rng(14, 0);
  const SymMatrix x = testing::random_symmetric(rng, 5);
  Matrix direct = -x.full();
  for (std::size_t i = 0; i < 30; ++i) {
    const Matrix ai = ens.matrix(i).full();
    direct += (ai * x.full()).trace() * ai / 30.0;
  }
  const double expected = direct.jacobiSvd().singularValues()(0);
  EXPECT_NEAR(deviation_norm(ens, x), expected, 1e-12 * expected);
}

TEST(DeviationNorm, ShrinksAsInverseSqrtM) {
  // Fixed unit rank-2 X at d=32, mean over ensembles: quadrupling m roughly halves it.
  CounterRng rng(15, 0);
  const Matrix frame = testing::orthonormal_frame(rng, 32, 2);
  SymMatrix x = SymMatrix::gram(frame);
  x *= 1.0 / x.frobenius_norm();
  double small = 0.0, large = 0.0;
  const int reps = 40;
  for (int k = 0; k < reps; ++k) {
    small += deviation_norm(GoeEnsemble::sample(200, 32, 900 + k), x) / reps;
    large += deviation_norm(GoeEnsemble::sample(800, 32, 900 + k), x) / reps;
  }
  EXPECT_GT(small / large, 1.6);
  EXPECT_LT(small / large, 2.4);
}

TEST(ConditionNumber, ReproducesPlantedKappa) {
  for (double kappa : {1.0, 2.0, 4.0, 10.0}) {
    const PlantedInstance inst = plant_instance(20, 3, kappa, SpectrumPolicy::kLogSpaced, 5);
    EXPECT_NEAR(condition_number(inst.xstar), kappa, 1e-10 * kappa);
  }
}

TEST(SpectralSummary, RankAndOrdering) {
  CounterRng rng(16, 0);
  const Matrix m = random_matrix(rng, 8, 3) * random_matrix(rng, 3, 8);
  const SpectralSummary s = spectral_summary(m);
  EXPECT_EQ(s.rank_numerical, 3u);
  for (Eigen::Index i = 1; i < s.singular_values.size(); ++i)
    EXPECT_GE(s.singular_values(i - 1), s.singular_values(i));
  EXPECT_NEAR(s.condition_number, s.singular_values(0) / s.singular_values(2), 1e-10 * s.condition_number);
}

TEST(FactorErrorNorms, MatchDenseDifference) {
  CounterRng rng(17, 0);
  for (int k = 0; k < 20; ++k) {
    const Matrix a = random_matrix(rng, 15, 3), b = random_matrix(rng, 15, 3);
    const Matrix diff = a * a.transpose() - b * b.transpose();
    const FactorErrorNorms n = factor_error_norms(a, b);
    EXPECT_NEAR(n.frobenius, diff.norm(), 1e-10 * diff.norm());
    const double spec = diff.jacobiSvd().singularValues()(0);
    EXPECT_NEAR(n.spectral, spec, 1e-10 * spec);
  }
}

TEST(PlantInstance, SpectrumAndFactorization) {
  const PlantedInstance inst = plant_instance(30, 3, 4.0, SpectrumPolicy::kLogSpaced, 3);
  EXPECT_NEAR(inst.spectrum(0), 4.0, 1e-12);
  EXPECT_NEAR(inst.spectrum(1), 2.0, 1e-12);
  EXPECT_NEAR(inst.spectrum(2), 1.0, 1e-12);
  const Vector eig = Eigen::SelfAdjointEigenSolver<Matrix>(inst.xstar.full()).eigenvalues();
  EXPECT_NEAR(eig(29), 4.0, 1e-10);
  EXPECT_NEAR(eig(28), 2.0, 1e-10);
  EXPECT_NEAR(eig(27), 1.0, 1e-10);
  EXPECT_GT(eig(0), -1e-10);
  EXPECT_LT((inst.ustar * inst.ustar.transpose() - inst.xstar.full()).norm(), 1e-12);
  EXPECT_NEAR(procrustes_dist(inst.ustar, spectral_init_from_matrix(inst.xstar, 3).factor), 0.0, 1e-10);

  const PlantedInstance one = plant_instance(10, 1, 7.0, SpectrumPolicy::kLogSpaced, 3);
  EXPECT_EQ(one.spectrum(0), 1.0);
  EXPECT_EQ(one.kappa, 1.0);
  const PlantedInstance lin = plant_instance(10, 3, 4.0, SpectrumPolicy::kLinear, 3);
  EXPECT_NEAR(lin.spectrum(1), 2.5, 1e-12);
}

}  // namespace
}  // namespace msense
