#pragma once

#include <cstdint>
#include <random>

namespace sslforge {

/// Deterministic random source. Wraps std::mt19937_64, whose output sequence
/// is pinned by the standard, and maps to doubles/integers with fixed
/// arithmetic instead of std::uniform_*_distribution (whose algorithms are
/// implementation-defined). Identical seeds therefore produce identical draws
/// on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi). Requires lo <= hi.
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
  }

  /// Unbiased uniform integer in [0, n). Requires n >= 1.
  /// Uses rejection sampling above the largest multiple of n.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = (~std::uint64_t{0} / n) * n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  /// Uniform integer in [lo, hi], both ends inclusive. Requires lo <= hi.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(below(span));
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace sslforge
