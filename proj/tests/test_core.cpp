#include "msense/counter_rng.hpp"
#include "msense/sym_matrix.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <set>

namespace msense {
namespace {

using testing::random_symmetric_full;

TEST(Philox, KnownAnswerVectors) {
  // Random123 kat_vectors for philox4x32-10.
  EXPECT_EQ(philox4x32({0, 0, 0, 0}, {0, 0}),
            (std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (std::array<std::uint32_t, 4>{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (std::array<std::uint32_t, 4>{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(CounterRng, SameStreamSameSequence) {
  CounterRng a(42, 3), b(42, 3), c(42, 4);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    differs = differs || x != c.normal();
  }
  EXPECT_TRUE(differs);
}

TEST(CounterRng, UniformInUnitInterval) {
  CounterRng rng(9, 0);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / n, 0.5, 3.0 * std::sqrt(1.0 / 12.0 / n));
}

TEST(CounterRng, NormalMoments) {
  CounterRng rng(11, 0);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s1 += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(DeriveSeed, DistinctTagsDistinctSeeds) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t tag = 0; tag < 1000; ++tag) seen.insert(derive_seed(5, tag));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(derive_seed(5, 17), derive_seed(5, 17));
  EXPECT_NE(derive_seed(5, 17), derive_seed(6, 17));
}

TEST(SymMatrix, PackedLayoutIsRowMajorUpper) {
  Matrix full(3, 3);
  full << 1, 2, 3, 2, 4, 5, 3, 5, 6;
  const SymMatrix s = SymMatrix::from_upper(full);
  const std::vector<double> expected{1, 2, 3, 4, 5, 6};
  ASSERT_EQ(s.packed().size(), expected.size());
  for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_EQ(s.packed()[k], expected[k]);
  EXPECT_EQ(s(2, 1), 5.0);
  EXPECT_EQ(s(1, 2), 5.0);
  EXPECT_EQ(s.full(), full);
}

TEST(SymMatrix, SharedCellForTransposedEntries) {
  SymMatrix s(4);
  s(0, 3) = 7.0;
  EXPECT_EQ(s(3, 0), 7.0);
  EXPECT_EQ(SymMatrix::packed_size(4), 10u);
}

TEST(SymMatrix, TraceInnerProductAndNorms) {
  CounterRng rng(1, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_symmetric_full(rng, 7);
    const Matrix b = random_symmetric_full(rng, 7);
    const SymMatrix sa = SymMatrix::from_upper(a), sb = SymMatrix::from_upper(b);
    EXPECT_NEAR(sa.dot(sb), (a * b).trace(), 1e-12 * (1 + std::abs((a * b).trace())));
    EXPECT_NEAR(sa.frobenius_norm(), a.norm(), 1e-12 * a.norm());
    const double spec = a.jacobiSvd().singularValues()(0);
    EXPECT_NEAR(sa.spectral_norm(), spec, 1e-12 * spec);
    const Vector x = testing::random_vector(rng, 7);
    EXPECT_NEAR(sa.quadratic_form(x), x.dot(a * x), 1e-12 * (1 + std::abs(x.dot(a * x))));
  }
}

TEST(SymMatrix, GramAndOuter) {
  CounterRng rng(2, 0);
  const Matrix u = testing::random_matrix(rng, 5, 2);
  EXPECT_TRUE(SymMatrix::gram(u).full().isApprox(u * u.transpose(), 1e-14));
  const Vector w = testing::random_vector(rng, 5);
  EXPECT_TRUE(SymMatrix::outer(w).full().isApprox(w * w.transpose(), 1e-14));
}

TEST(SymMatrix, ArithmeticMatchesDense) {
  CounterRng rng(3, 0);
  const Matrix a = random_symmetric_full(rng, 4), b = random_symmetric_full(rng, 4);
  const SymMatrix sa = SymMatrix::from_upper(a), sb = SymMatrix::from_upper(b);
  EXPECT_TRUE((sa + sb).full().isApprox(a + b));
  EXPECT_TRUE((sa - 2.0 * sb).full().isApprox(a - 2.0 * b));
  SymMatrix c = sa;
  c.axpy(-0.5, sb);
  EXPECT_TRUE(c.full().isApprox(a - 0.5 * b));
}

TEST(SymMatrix, EigenByMagnitudeOrdersByAbsoluteValue) {
  Matrix diag = Vector{{-5.0, 1.0, 3.0, -0.5}}.asDiagonal();
  const MagnitudeEigen eig = eigen_by_magnitude(diag);
  EXPECT_NEAR(eig.values(0), -5.0, 1e-14);
  EXPECT_NEAR(eig.values(1), 3.0, 1e-14);
  EXPECT_NEAR(eig.values(2), 1.0, 1e-14);
  EXPECT_NEAR(eig.values(3), -0.5, 1e-14);
}

}  // namespace
}  // namespace msense
