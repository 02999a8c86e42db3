#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <utility>

namespace cogtree {

/// Portable pseudo-random generator: xoshiro256** (Blackman & Vigna, 2018)
/// with its 256-bit state expanded from a 64-bit seed by splitmix64.
///
/// All derived quantities (uniform doubles, bounded integers, normals,
/// shuffles) are computed here with fixed algorithms instead of the
/// implementation-defined <random> distributions, so a given seed yields the
/// same stream on every platform and standard library.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) noexcept;

  /// Independent stream for a named purpose, e.g. `Rng::derive(seed, "init")`.
  static Rng derive(std::uint64_t seed, std::string_view purpose) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() noexcept { return next(); }

  std::uint64_t next() noexcept;

  /// Uniform on [0, 1) with 53 random mantissa bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;

  /// Uniform integer on [0, n); unbiased (Lemire's multiply-and-reject).
  std::size_t below(std::size_t n) noexcept;

  /// Standard normal via the Box-Muller transform (one draw per call; the
  /// paired value is discarded so the stream position never depends on
  /// call history).
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  /// Fisher-Yates shuffle driven by `below`.
  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state) noexcept;

}  // namespace cogtree
