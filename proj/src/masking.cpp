#include "sslforge/masking.hpp"

#include <algorithm>

#include "sslforge/util.hpp"

namespace sslforge {

bool MaskSpec::is_masked(std::uint32_t t) const {
  return std::binary_search(masked.begin(), masked.end(), t);
}

std::vector<std::uint8_t> MaskSpec::to_bitmap() const {
  std::vector<std::uint8_t> bitmap(total_frames, 0);
  for (const std::uint32_t t : masked) bitmap[t] = 1;
  return bitmap;
}

MaskSpec sample_mask(std::uint32_t total_frames, std::uint32_t span,
                     double start_probability, Rng& rng) {
  if (span == 0) {
    throw Error("sample_mask: span must be >= 1");
  }
  if (!(start_probability >= 0.0 && start_probability <= 1.0)) {
    throw Error("sample_mask: start probability must be in [0, 1]");
  }
  MaskSpec spec;
  spec.total_frames = total_frames;
  spec.span = span;
  spec.start_probability = start_probability;
  if (total_frames == 0) return spec;

  std::vector<std::uint8_t> bitmap(total_frames, 0);
  for (std::uint32_t t = 0; t < total_frames; ++t) {
    if (rng.uniform() < start_probability) {
      const std::uint32_t end = std::min(total_frames, t + span);
      std::fill(bitmap.begin() + t, bitmap.begin() + end, std::uint8_t{1});
    }
  }
  for (std::uint32_t t = 0; t < total_frames; ++t) {
    if (bitmap[t]) spec.masked.push_back(t);
  }
  return spec;
}

}  // namespace sslforge
