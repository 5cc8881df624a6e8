#pragma once

#include "msense/counter_rng.hpp"
#include "msense/sym_matrix.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace msense::testing {

// Random inputs for tests. Oracles in the test files use Eigen directly and
// share nothing with the library beyond the RNG.

inline Matrix random_matrix(CounterRng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = rng.normal();
  return out;
}

inline Vector random_vector(CounterRng& rng, Eigen::Index n) {
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = rng.normal();
  return out;
}

inline Vector random_unit(CounterRng& rng, Eigen::Index n) {
  Vector v = random_vector(rng, n);
  return v / v.norm();
}

inline Matrix random_symmetric_full(CounterRng& rng, Eigen::Index d) {
  const Matrix g = random_matrix(rng, d, d);
  return 0.5 * (g + g.transpose());
}

inline SymMatrix random_symmetric(CounterRng& rng, std::size_t d) {
  return SymMatrix::from_upper(random_symmetric_full(rng, static_cast<Eigen::Index>(d)));
}

inline Matrix random_orthogonal(CounterRng& rng, Eigen::Index n) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(rng, n, n));
  Matrix q = qr.householderQ();
  // Fix column signs so q is Haar distributed.
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  return q;
}

inline Matrix orthonormal_frame(CounterRng& rng, Eigen::Index d, Eigen::Index k) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(rng, d, k));
  return qr.householderQ() * Matrix::Identity(d, k);
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace msense::testing
