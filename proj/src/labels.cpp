#include "sslforge/labels.hpp"

#include <fstream>
#include <map>

#include "json.hpp"
#include "sslforge/util.hpp"

namespace sslforge {

FrameLabelSequence assign_labels(const FrameFeatureSequence& features,
                                 const Codebook& codebook) {
  if (features.dim != codebook.dim) {
    throw Error("assign_labels: feature dim " + std::to_string(features.dim) +
                " does not match codebook dim " +
                std::to_string(codebook.dim) + " for '" + features.source_id +
                "'");
  }
  FrameLabelSequence out;
  out.frame_shift_ms = features.frame_shift_ms;
  out.source_id = features.source_id;
  const std::size_t frames = features.frames();
  out.labels.resize(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    out.labels[t] =
        static_cast<std::uint32_t>(nearest_centroid(codebook, features.frame(t)));
  }
  return out;
}

FrameLabelSequence downsample_labels(const FrameLabelSequence& fine,
                                     int factor) {
  if (factor != 2 && factor != 4) {
    throw Error("downsample_labels: factor must be 2 or 4, got " +
                std::to_string(factor));
  }
  FrameLabelSequence out;
  out.frame_shift_ms = fine.frame_shift_ms * factor;
  out.source_id = fine.source_id;
  const std::size_t n = fine.labels.size();
  const auto f = static_cast<std::size_t>(factor);
  out.labels.reserve((n + f - 1) / f);
  for (std::size_t begin = 0; begin < n; begin += f) {
    const std::size_t end = std::min(n, begin + f);
    // Majority vote; ties go to the label appearing earliest in the group.
    std::map<std::uint32_t, std::size_t> counts;
    for (std::size_t i = begin; i < end; ++i) counts[fine.labels[i]] += 1;
    std::size_t best_count = 0;
    for (const auto& [label, count] : counts) {
      best_count = std::max(best_count, count);
    }
    std::uint32_t winner = fine.labels[begin];
    for (std::size_t i = begin; i < end; ++i) {
      if (counts[fine.labels[i]] == best_count) {
        winner = fine.labels[i];
        break;
      }
    }
    out.labels.push_back(winner);
  }
  return out;
}

void save_labels_jsonl(const std::vector<FrameLabelSequence>& sequences,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write labels: " + path.string());
  }
  for (const auto& seq : sequences) {
    const nlohmann::json j{
        {"id", seq.source_id},
        {"frame_shift_ms", seq.frame_shift_ms},
        {"labels", seq.labels},
    };
    out << j.dump() << '\n';
  }
  if (!out) {
    throw Error("short write to labels: " + path.string());
  }
}

std::vector<FrameLabelSequence> load_labels_jsonl(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open labels: " + path.string());
  }
  std::vector<FrameLabelSequence> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      FrameLabelSequence seq;
      seq.source_id = j.at("id").get<std::string>();
      seq.frame_shift_ms = j.at("frame_shift_ms").get<int>();
      seq.labels = j.at("labels").get<std::vector<std::uint32_t>>();
      out.push_back(std::move(seq));
    } catch (const nlohmann::json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(line_number) +
                  ": invalid label record: " + e.what());
    }
  }
  return out;
}

}  // namespace sslforge
