#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "trim/ndarray.hpp"

namespace trim {

/// SplitMix64 finalizer; used to derive seeds for the engine and for children.
std::uint64_t mix64(std::uint64_t z) noexcept;

/// Deterministic, platform-independent random stream.
///
/// The engine is std::mt19937_64 (its output sequence is fixed by the
/// standard). Distributions are implemented here rather than taken from
/// <random>, whose distribution algorithms are implementation-defined.
/// Child streams are keyed by (seed, label) only, so deriving a child never
/// depends on how many values the parent has already drawn.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  SeededRng child(std::string_view label) const;
  SeededRng child(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer on [0, n), unbiased (rejection sampling).
  std::uint64_t uniform_index(std::uint64_t n);
  /// Standard normal via the Box-Muller transform; the second variate of each
  /// pair is cached and returned by the next call.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// n i.i.d. N(0,1) draws as a rank-1 array.
NdArray standard_normal(SeededRng& rng, std::size_t n);

}  // namespace trim
