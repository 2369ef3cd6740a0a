#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sslforge {

/// Row-major [frames x dim] feature matrix for one utterance, tagged with the
/// frame shift it was extracted at.
struct FrameFeatureSequence {
  std::vector<double> data;
  std::size_t dim = 0;
  int frame_shift_ms = 0;
  std::string source_id;

  std::size_t frames() const { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const double> frame(std::size_t t) const {
    return {data.data() + t * dim, dim};
  }
};

/// Cepstral features for clustering: 13 cepstra plus first and second
/// differences, 39 dims per frame, 25 ms analysis windows. The frame count is
/// floor(samples / shift_samples); analysis windows that run past the end of
/// the waveform are zero-padded, so every retained shift-step yields a frame.
///
/// sample_rate must be 16000 and frame_shift_ms one of 20, 40, 80. A waveform
/// shorter than one frame shift yields an empty (0-frame) sequence.
FrameFeatureSequence extract_features(std::span<const float> waveform,
                                      std::uint32_t sample_rate,
                                      int frame_shift_ms,
                                      std::string source_id);

/// Fuses per-utterance feature streams extracted at different frame shifts
/// into one sequence at the finest shift present:
///  * every input must share source_id, and every shift must be an integer
///    multiple of the finest shift;
///  * each coarse row is repeated (its shift / finest shift) times;
///  * the repeated stream is truncated, or padded by repeating its last row,
///    to exactly the finest stream's frame count;
///  * rows are concatenated along the feature dimension in input order.
/// The finest frame count is taken from the first input at the finest shift.
FrameFeatureSequence fuse_multires(std::span<const FrameFeatureSequence> streams);

inline constexpr int kValidFrameShiftsMs[] = {20, 40, 80};
bool is_valid_frame_shift(int frame_shift_ms);

}  // namespace sslforge
