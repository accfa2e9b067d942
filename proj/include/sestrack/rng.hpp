#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace sestrack {

/// SplitMix64 finalizer (Stafford variant 13). Bijective on 64-bit words
/// with full avalanche; used for seed derivation only.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Derives the seed of replication `index` from a master seed. The result
/// is mix64(master ^ mix64(index + golden)), so neighbouring indices land on
/// unrelated keys.
std::uint64_t child_seed(std::uint64_t master, std::uint64_t index) noexcept;

/// Philox4x32-10 counter-based generator.
///
/// The 64-bit seed is the Philox key; a 128-bit block counter starts at
/// zero and each block yields four 32-bit words, consumed as two 64-bit
/// outputs. The stream is a pure function of (seed, number of draws), so
/// it can be reproduced or skipped without replaying earlier draws.
///
/// Normal variates use the Box-Muller transform on two uniforms in the open
/// interval (0, 1); both outputs of a pair are used.
class PhiloxEngine {
 public:
  using result_type = std::uint64_t;

  explicit PhiloxEngine(std::uint64_t seed) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

  /// Uniform in (0, 1): 53 random bits shifted by half an ulp.
  double uniform() noexcept;

  /// Standard normal N(0, 1).
  double normal() noexcept;

  /// Skips `blocks` Philox blocks (two 64-bit outputs each).
  void discard_blocks(std::uint64_t blocks) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 4> block_{};
  int next_word_ = 4;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// One Philox4x32-10 block, exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter,
                                           std::array<std::uint32_t, 2> key) noexcept;

}  // namespace sestrack
