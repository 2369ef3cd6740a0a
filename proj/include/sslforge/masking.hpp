#pragma once

#include <cstdint>
#include <vector>

#include "sslforge/rng.hpp"

namespace sslforge {

/// Frames hidden from the model for one utterance. `masked` holds the sorted,
/// deduplicated union of all sampled spans.
struct MaskSpec {
  std::vector<std::uint32_t> masked;
  std::uint32_t total_frames = 0;
  std::uint32_t span = 0;
  double start_probability = 0.0;

  bool is_masked(std::uint32_t t) const;
  /// Dense 0/1 view, length total_frames.
  std::vector<std::uint8_t> to_bitmap() const;
};

inline constexpr std::uint32_t kDefaultMaskSpan = 10;
inline constexpr double kDefaultMaskStartProbability = 0.08;

/// Span masking: every frame t independently starts a span with probability
/// start_probability; a started span covers [t, t + span), clamped to the
/// sequence end. Overlapping spans merge via set union. total_frames == 0
/// yields an empty mask; start_probability must be in [0, 1] and span >= 1.
MaskSpec sample_mask(std::uint32_t total_frames, std::uint32_t span,
                     double start_probability, Rng& rng);

}  // namespace sslforge
