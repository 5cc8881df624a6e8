#pragma once

#include "msense/sym_matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>

namespace msense {

enum class StorageMode { kMaterialized, kStreamed };

std::string to_string(StorageMode mode);
StorageMode storage_mode_from_string(const std::string& name);

/// Everything needed to regenerate an ensemble bit-for-bit.
struct EnsembleDescriptor {
  std::size_t m = 0;
  std::size_t d = 0;
  std::uint64_t seed = 0;
  StorageMode mode = StorageMode::kMaterialized;

  friend bool operator==(const EnsembleDescriptor&, const EnsembleDescriptor&) = default;
};

/// Observation vector y (length m, or m+1 for virtual observations).
struct ObservationVector {
  Vector values;
  double noise_sigma = 0.0;
};

/// m independent GOE matrices A_1..A_m together with the normalized
/// measurement operator
///
///   [A(X)]_i = <A_i, X> / sqrt(m),     A*(v) = sum_i v_i A_i / sqrt(m).
///
/// Matrix i is generated from the counter stream (seed, i): diagonal cells
/// N(0,1), strict-upper cells N(0,1/2), one Box-Muller draw per packed cell in
/// packed order. Streamed and materialized ensembles therefore agree bitwise.
///
/// Immutable after construction; copies share the materialized storage.
class GoeEnsemble {
 public:
  static constexpr std::size_t kDefaultMemoryBudget = std::size_t{1} << 30;

  static GoeEnsemble sample(std::size_t m, std::size_t d, std::uint64_t seed,
                            StorageMode mode = StorageMode::kMaterialized,
                            std::size_t memory_budget_bytes = kDefaultMemoryBudget);
  static GoeEnsemble from_descriptor(const EnsembleDescriptor& desc,
                                     std::size_t memory_budget_bytes = kDefaultMemoryBudget);

  EnsembleDescriptor descriptor() const { return {m_, d_, seed_, mode_}; }
  std::size_t m() const { return m_; }
  std::size_t dim() const { return d_; }
  std::uint64_t seed() const { return seed_; }
  StorageMode mode() const { return mode_; }
  std::size_t packed_size() const { return SymMatrix::packed_size(d_); }

  /// A_i (unnormalized).
  SymMatrix matrix(std::size_t i) const;

  /// (1/sqrt m) <A_i, X> for all i.
  Vector apply(const SymMatrix& x) const;
  /// (1/sqrt m) sum_i v_i A_i.
  SymMatrix adjoint(const Eigen::Ref<const Vector>& v) const;
  /// A*(A(X)).
  SymMatrix normal_apply(const SymMatrix& x) const { return adjoint(apply(x)); }

  /// Unnormalized <A_i, X> for all i.
  Vector inner_products(const SymMatrix& x) const;

 private:
  GoeEnsemble(std::size_t m, std::size_t d, std::uint64_t seed, StorageMode mode);

  void generate_packed(std::size_t i, std::span<double> out) const;

  std::size_t m_ = 0;
  std::size_t d_ = 0;
  std::uint64_t seed_ = 0;
  StorageMode mode_ = StorageMode::kMaterialized;
  // m x packed_size, row i = packed upper triangle of A_i.
  std::shared_ptr<const Matrix> rows_;
};

/// Fills `out` with the packed upper triangle of GOE matrix `index` of stream
/// `seed`. Exposed for tests and for streamed consumers.
void generate_goe_packed(std::uint64_t seed, std::size_t index, std::size_t d,
                         std::span<double> out);

GoeEnsemble sample_ensemble(std::size_t m, std::size_t d, std::uint64_t seed,
                            StorageMode mode = StorageMode::kMaterialized);

ObservationVector apply_operator(const GoeEnsemble& ens, const SymMatrix& x);
SymMatrix apply_adjoint(const GoeEnsemble& ens, const ObservationVector& v);

/// i.i.d. N(0, sigma^2) noise of length m drawn from `noise_seed`.
Vector sample_noise(std::size_t m, double sigma, std::uint64_t noise_seed);

/// y = A(X*) + xi with xi ~ N(0, sigma^2 I). sigma = 0 gives A(X*) exactly.
ObservationVector observe(const GoeEnsemble& ens, const SymMatrix& xstar, double sigma,
                          std::uint64_t noise_seed);

}  // namespace msense
