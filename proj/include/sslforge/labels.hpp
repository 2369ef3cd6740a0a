#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sslforge/features.hpp"
#include "sslforge/kmeans.hpp"

namespace sslforge {

/// Per-frame discrete targets for one utterance at a given frame shift.
struct FrameLabelSequence {
  std::vector<std::uint32_t> labels;
  int frame_shift_ms = 0;
  std::string source_id;

  bool operator==(const FrameLabelSequence&) const = default;
};

/// Quantizes every feature frame to its nearest codebook centroid.
/// Feature dim must match the codebook dim.
FrameLabelSequence assign_labels(const FrameFeatureSequence& features,
                                 const Codebook& codebook);

/// Coarsens labels by an integer factor (2 or 4, e.g. 20 ms -> 40/80 ms).
/// Each output label is the majority vote over its group of up to `factor`
/// input frames (the last group may be shorter); ties go to the label whose
/// first occurrence in the group is earliest. Output length is
/// ceil(input_length / factor).
FrameLabelSequence downsample_labels(const FrameLabelSequence& fine,
                                     int factor);

/// JSON-lines label files: one {"id", "frame_shift_ms", "labels"} object per
/// line, in sequence order.
void save_labels_jsonl(const std::vector<FrameLabelSequence>& sequences,
                       const std::filesystem::path& path);
std::vector<FrameLabelSequence> load_labels_jsonl(
    const std::filesystem::path& path);

}  // namespace sslforge
