#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sslforge {

/// Error type thrown by every operation in this library. Messages are meant
/// to be surfaced verbatim to users (the CLI wraps them in a JSON diagnostic).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// FNV-1a over bytes. Used to derive per-item seeds from string ids and to
/// fingerprint files in the demo's reproducibility check.
constexpr std::uint64_t fnv1a(std::string_view bytes,
                              std::uint64_t state = 0xcbf29ce484222325ull) noexcept {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001b3ull;
  }
  return state;
}

/// Finalizer from splitmix64; a cheap, well-mixed 64-bit permutation.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a string key.
/// Work scheduled per utterance uses this so that results do not depend on
/// the order items are processed in (sequential and threaded runs agree).
constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view key) noexcept {
  return mix64(base ^ fnv1a(key));
}

/// Derives an independent stream seed from a base seed and an integer key.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t key) noexcept {
  return mix64(base + 0x632be59bd9b4e019ull * (key + 1));
}

/// Runs fn(i) for i in [0, n). With threads <= 1 the loop is sequential;
/// otherwise indices are split into contiguous chunks, one worker each.
/// Callers must make iterations independent (no shared mutable state), which
/// is what keeps threaded runs bitwise identical to sequential ones.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace sslforge
