#pragma once

#include <array>
#include <cstdint>

namespace msense {

/// Philox4x32-10 block function (Salmon et al., Random123). Stateless: the
/// output depends only on (key, counter).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix64(std::uint64_t x);

/// Derives a child seed from (seed, tag). Distinct tags give unrelated streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

/// Sequential view over the counter-based stream identified by (seed, stream).
///
/// Two CounterRng objects with the same (seed, stream) produce identical
/// sequences, independent of what any other stream did. This is what lets an
/// ensemble regenerate matrix i from (seed, i) alone.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via Box-Muller; values are produced in pairs.
  double normal();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_words_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace msense
