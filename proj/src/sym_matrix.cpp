#include "msense/sym_matrix.hpp"

#include "msense/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace msense {

SymMatrix::SymMatrix(std::size_t dim) : dim_(dim), packed_(packed_size(dim), 0.0) {}

SymMatrix SymMatrix::from_upper(const Eigen::Ref<const Matrix>& full) {
  if (full.rows() != full.cols()) throw DimensionError("SymMatrix requires a square matrix");
  const auto d = static_cast<std::size_t>(full.rows());
  SymMatrix out(d);
  std::size_t k = 0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) out.packed_[k++] = full(i, j);
  return out;
}

SymMatrix SymMatrix::symmetrized(const Eigen::Ref<const Matrix>& full) {
  if (full.rows() != full.cols()) throw DimensionError("SymMatrix requires a square matrix");
  const auto d = static_cast<std::size_t>(full.rows());
  SymMatrix out(d);
  std::size_t k = 0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) out.packed_[k++] = 0.5 * (full(i, j) + full(j, i));
  return out;
}

SymMatrix SymMatrix::identity(std::size_t dim) {
  SymMatrix out(dim);
  for (std::size_t i = 0; i < dim; ++i) out(i, i) = 1.0;
  return out;
}

SymMatrix SymMatrix::gram(const Eigen::Ref<const Matrix>& factor) {
  const Matrix g = factor * factor.transpose();
  return from_upper(g);
}

SymMatrix SymMatrix::outer(const Eigen::Ref<const Vector>& w) {
  const auto d = static_cast<std::size_t>(w.size());
  SymMatrix out(d);
  std::size_t k = 0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) out.packed_[k++] = w(i) * w(j);
  return out;
}

Matrix SymMatrix::full() const {
  Matrix m(dim_, dim_);
  std::size_t k = 0;
  for (std::size_t i = 0; i < dim_; ++i) {
    m(i, i) = packed_[k++];
    for (std::size_t j = i + 1; j < dim_; ++j) {
      m(i, j) = packed_[k];
      m(j, i) = packed_[k];
      ++k;
    }
  }
  return m;
}

double SymMatrix::dot(const SymMatrix& other) const {
  if (other.dim_ != dim_) throw DimensionError("SymMatrix::dot dimension mismatch");
  double diag = 0.0;
  double off = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < dim_; ++i) {
    diag += packed_[k] * other.packed_[k];
    ++k;
    for (std::size_t j = i + 1; j < dim_; ++j, ++k) off += packed_[k] * other.packed_[k];
  }
  return diag + 2.0 * off;
}

double SymMatrix::frobenius_norm() const { return std::sqrt(std::max(0.0, dot(*this))); }

double SymMatrix::spectral_norm() const {
  if (dim_ == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(full(), Eigen::EigenvaluesOnly);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

double SymMatrix::quadratic_form(const Eigen::Ref<const Vector>& w) const {
  if (static_cast<std::size_t>(w.size()) != dim_)
    throw DimensionError("quadratic_form dimension mismatch");
  double acc = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < dim_; ++i) {
    acc += packed_[k++] * w(i) * w(i);
    for (std::size_t j = i + 1; j < dim_; ++j) acc += 2.0 * packed_[k++] * w(i) * w(j);
  }
  return acc;
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& other) { return axpy(1.0, other); }

SymMatrix& SymMatrix::operator-=(const SymMatrix& other) { return axpy(-1.0, other); }

SymMatrix& SymMatrix::operator*=(double scale) {
  for (double& v : packed_) v *= scale;
  return *this;
}

SymMatrix& SymMatrix::axpy(double scale, const SymMatrix& other) {
  if (other.dim_ != dim_) throw DimensionError("SymMatrix arithmetic dimension mismatch");
  for (std::size_t k = 0; k < packed_.size(); ++k) packed_[k] += scale * other.packed_[k];
  return *this;
}

bool SymMatrix::all_finite() const {
  return std::all_of(packed_.begin(), packed_.end(), [](double v) { return std::isfinite(v); });
}

Vector SymMatrix::weighted_packed() const {
  Vector out(static_cast<Eigen::Index>(packed_.size()));
  std::size_t k = 0;
  for (std::size_t i = 0; i < dim_; ++i) {
    out(k) = packed_[k];
    ++k;
    for (std::size_t j = i + 1; j < dim_; ++j, ++k) out(k) = 2.0 * packed_[k];
  }
  return out;
}

SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
SymMatrix operator*(double scale, SymMatrix a) { return a *= scale; }

MagnitudeEigen eigen_by_magnitude(const Eigen::Ref<const Matrix>& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  const Vector& values = solver.eigenvalues();
  const Matrix& vectors = solver.eigenvectors();
  const Eigen::Index n = values.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Stable: ties keep the solver's ascending order, which makes tie-breaking
  // deterministic.
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(values(a)) > std::abs(values(b));
  });
  MagnitudeEigen out{Vector(n), Matrix(sym.rows(), n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = values(order[k]);
    out.vectors.col(k) = vectors.col(order[k]);
  }
  return out;
}

}  // namespace msense
