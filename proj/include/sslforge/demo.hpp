#pragma once

#include <cstdint>
#include <filesystem>

#include "json.hpp"

namespace sslforge {

struct DemoOptions {
  std::uint64_t seed = 42;
  std::size_t stage1_steps = 8;
  std::size_t stage2_steps = 6;
  std::size_t kmeans_clusters = 12;
  unsigned threads = 1;
};

/// End-to-end walkthrough on synthetic audio: builds a small imbalanced
/// corpus plus a noise pool under out_dir/data, then runs the full pipeline
/// (curation -> clustering -> multi-resolution labels -> two-stage masked
/// training -> scoring) twice with the same seed into out_dir/run_a and
/// out_dir/run_b. Every artifact of both runs is fingerprinted; the demo
/// fails if the runs are not byte-identical. Returns the report that is also
/// written to out_dir/report.json (timings live only there, outside the
/// compared directories).
nlohmann::json run_demo(const std::filesystem::path& out_dir,
                        const DemoOptions& options);

}  // namespace sslforge
