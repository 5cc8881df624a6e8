#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace msense {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense real symmetric d x d matrix stored as its packed upper triangle.
///
/// Storage is row-major over the upper triangle: (0,0), (0,1), ..., (0,d-1),
/// (1,1), ..., (d-1,d-1). Both (i,j) and (j,i) address the same cell, so the
/// matrix cannot become asymmetric.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t dim);

  /// Takes the upper triangle of `full`; the lower triangle is ignored.
  static SymMatrix from_upper(const Eigen::Ref<const Matrix>& full);
  /// Symmetrizes (M + M^T)/2 before packing.
  static SymMatrix symmetrized(const Eigen::Ref<const Matrix>& full);
  static SymMatrix identity(std::size_t dim);
  /// U U^T for a d x r factor.
  static SymMatrix gram(const Eigen::Ref<const Matrix>& factor);
  /// w w^T.
  static SymMatrix outer(const Eigen::Ref<const Vector>& w);

  static constexpr std::size_t packed_size(std::size_t dim) {
    return dim * (dim + 1) / 2;
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return packed_.size(); }

  double operator()(std::size_t i, std::size_t j) const {
    return packed_[index(i, j)];
  }
  double& operator()(std::size_t i, std::size_t j) {
    return packed_[index(i, j)];
  }

  std::span<const double> packed() const { return packed_; }
  std::span<double> packed() { return packed_; }

  Matrix full() const;

  /// Trace inner product <A, B> = tr(A B).
  double dot(const SymMatrix& other) const;
  double frobenius_norm() const;
  /// Largest |eigenvalue|.
  double spectral_norm() const;
  /// w^T A w.
  double quadratic_form(const Eigen::Ref<const Vector>& w) const;

  SymMatrix& operator+=(const SymMatrix& other);
  SymMatrix& operator-=(const SymMatrix& other);
  SymMatrix& operator*=(double scale);
  /// this += scale * other
  SymMatrix& axpy(double scale, const SymMatrix& other);

  bool all_finite() const;

  /// Packed coefficients weighted so that `weighted . other.packed()` equals
  /// the trace inner product (off-diagonal cells count twice).
  Vector weighted_packed() const;

  friend bool operator==(const SymMatrix&, const SymMatrix&) = default;

 private:
  std::size_t index(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return i * dim_ - (i * (i + 1)) / 2 + j;
  }

  std::size_t dim_ = 0;
  std::vector<double> packed_;
};

SymMatrix operator+(SymMatrix a, const SymMatrix& b);
SymMatrix operator-(SymMatrix a, const SymMatrix& b);
SymMatrix operator*(double scale, SymMatrix a);

/// Eigen pairs of a symmetric matrix sorted by decreasing |eigenvalue|.
struct MagnitudeEigen {
  Vector values;
  Matrix vectors;
};

MagnitudeEigen eigen_by_magnitude(const Eigen::Ref<const Matrix>& sym);

}  // namespace msense
