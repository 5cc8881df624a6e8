#include "msense/measurement.hpp"

#include "msense/counter_rng.hpp"
#include "msense/error.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace msense {

namespace {

// Keeps noise draws off the ensemble's (seed, index) streams even if a caller
// reuses one seed for both.
constexpr std::uint64_t kNoiseStream = 0x6E6F697365000000ull;

}  // namespace

std::string to_string(StorageMode mode) {
  return mode == StorageMode::kMaterialized ? "materialized" : "streamed";
}

StorageMode storage_mode_from_string(const std::string& name) {
  if (name == "materialized") return StorageMode::kMaterialized;
  if (name == "streamed") return StorageMode::kStreamed;
  throw ConfigError("unknown storage mode '" + name + "'");
}

void generate_goe_packed(std::uint64_t seed, std::size_t index, std::size_t d,
                         std::span<double> out) {
  if (out.size() != SymMatrix::packed_size(d))
    throw DimensionError("generate_goe_packed: output span has wrong size");
  CounterRng rng(seed, index);
  const double off_scale = std::numbers::sqrt2 / 2.0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < d; ++i) {
    out[k++] = rng.normal();
    for (std::size_t j = i + 1; j < d; ++j) out[k++] = off_scale * rng.normal();
  }
}

GoeEnsemble::GoeEnsemble(std::size_t m, std::size_t d, std::uint64_t seed, StorageMode mode)
    : m_(m), d_(d), seed_(seed), mode_(mode) {}

GoeEnsemble GoeEnsemble::sample(std::size_t m, std::size_t d, std::uint64_t seed,
                                StorageMode mode, std::size_t memory_budget_bytes) {
  if (m == 0 || d == 0) throw DimensionError("sample_ensemble requires m >= 1 and d >= 1");
  GoeEnsemble ens(m, d, seed, mode);
  if (mode == StorageMode::kStreamed) return ens;

  const std::size_t p = SymMatrix::packed_size(d);
  const long double bytes = static_cast<long double>(m) * p * sizeof(double);
  if (bytes > static_cast<long double>(memory_budget_bytes))
    throw MemoryBudgetError("materialized ensemble (m=" + std::to_string(m) +
                            ", d=" + std::to_string(d) +
                            ") exceeds the memory budget; use streamed mode");

  auto rows = std::make_shared<Matrix>(m, p);
  std::vector<double> buffer(p);
  for (std::size_t i = 0; i < m; ++i) {
    generate_goe_packed(seed, i, d, buffer);
    for (std::size_t k = 0; k < p; ++k) (*rows)(i, k) = buffer[k];
  }
  ens.rows_ = std::move(rows);
  return ens;
}

GoeEnsemble GoeEnsemble::from_descriptor(const EnsembleDescriptor& desc,
                                         std::size_t memory_budget_bytes) {
  return sample(desc.m, desc.d, desc.seed, desc.mode, memory_budget_bytes);
}

void GoeEnsemble::generate_packed(std::size_t i, std::span<double> out) const {
  if (rows_) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = (*rows_)(i, k);
  } else {
    generate_goe_packed(seed_, i, d_, out);
  }
}

SymMatrix GoeEnsemble::matrix(std::size_t i) const {
  if (i >= m_) throw DimensionError("ensemble index out of range");
  SymMatrix out(d_);
  generate_packed(i, out.packed());
  return out;
}

Vector GoeEnsemble::inner_products(const SymMatrix& x) const {
  if (x.dim() != d_) throw DimensionError("measurement operator: dimension mismatch");
  const Vector weighted = x.weighted_packed();
  if (rows_) return (*rows_) * weighted;

  Vector out(m_);
  std::vector<double> buffer(packed_size());
  for (std::size_t i = 0; i < m_; ++i) {
    generate_goe_packed(seed_, i, d_, buffer);
    out(i) = Eigen::Map<const Vector>(buffer.data(), buffer.size()).dot(weighted);
  }
  return out;
}

Vector GoeEnsemble::apply(const SymMatrix& x) const {
  return inner_products(x) / std::sqrt(static_cast<double>(m_));
}

SymMatrix GoeEnsemble::adjoint(const Eigen::Ref<const Vector>& v) const {
  if (static_cast<std::size_t>(v.size()) != m_)
    throw DimensionError("adjoint: vector length does not match m");
  const double scale = 1.0 / std::sqrt(static_cast<double>(m_));
  SymMatrix out(d_);
  Eigen::Map<Vector> acc(out.packed().data(), static_cast<Eigen::Index>(out.size()));
  if (rows_) {
    acc.noalias() = rows_->transpose() * v;
  } else {
    std::vector<double> buffer(packed_size());
    for (std::size_t i = 0; i < m_; ++i) {
      generate_goe_packed(seed_, i, d_, buffer);
      acc += v(i) * Eigen::Map<const Vector>(buffer.data(), buffer.size());
    }
  }
  acc *= scale;
  return out;
}

GoeEnsemble sample_ensemble(std::size_t m, std::size_t d, std::uint64_t seed, StorageMode mode) {
  return GoeEnsemble::sample(m, d, seed, mode);
}

ObservationVector apply_operator(const GoeEnsemble& ens, const SymMatrix& x) {
  return {ens.apply(x), 0.0};
}

SymMatrix apply_adjoint(const GoeEnsemble& ens, const ObservationVector& v) {
  return ens.adjoint(v.values);
}

Vector sample_noise(std::size_t m, double sigma, std::uint64_t noise_seed) {
  if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be nonnegative");
  Vector xi(m);
  CounterRng rng(noise_seed, kNoiseStream);
  for (std::size_t i = 0; i < m; ++i) xi(i) = sigma * rng.normal();
  return xi;
}

ObservationVector observe(const GoeEnsemble& ens, const SymMatrix& xstar, double sigma,
                          std::uint64_t noise_seed) {
  ObservationVector y = apply_operator(ens, xstar);
  if (sigma > 0.0) y.values += sample_noise(ens.m(), sigma, noise_seed);
  else if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be nonnegative");
  y.noise_sigma = sigma;
  return y;
}

}  // namespace msense
