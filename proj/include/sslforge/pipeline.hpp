#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sslforge/batching.hpp"
#include "sslforge/features.hpp"
#include "sslforge/toymodel.hpp"

namespace sslforge {

/// Everything the batch-to-trainer path needs, bundled so the demo and the
/// CLI drive the identical pipeline.
struct PipelineConfig {
  AugmentConfig augment;
  std::vector<int> fuse_shifts_ms{20, 40, 80};  // resolutions fed to the model
  std::uint32_t mask_span = kDefaultMaskSpan;
  double mask_start_probability = kDefaultMaskStartProbability;
  double batch_cap_seconds = 30.0;
  unsigned threads = 1;

  void validate() const;  // throws Error
};

/// Extracts features at each shift and fuses them to the finest resolution.
FrameFeatureSequence extract_fused_features(std::span<const float> samples,
                                            std::uint32_t sample_rate,
                                            std::span<const int> shifts_ms,
                                            const std::string& id);

/// One trainer-ready view of a batch: per-item fused features, labels, and
/// masks concatenated along the frame axis (mask indices shifted by each
/// item's offset). Valid because the toy model is frame-local.
struct CollatedBatch {
  FrameFeatureSequence features;
  FrameLabelSequence labels;
  MaskSpec mask;
};
CollatedBatch collate_batch(const Batch& batch, std::span<const int> shifts_ms);

/// Counters accumulated while training.
struct TrainOutcome {
  std::vector<StageSummary> summaries;
  std::size_t items_seen = 0;
  std::size_t items_augmented = 0;
  std::size_t items_peer_mixed = 0;
  std::size_t items_noise_mixed = 0;
  std::size_t empty_mask_steps = 0;  // steps skipped with a warning
};

/// Optional per-stage observer, called after the stage's model
/// initialization and before its first step.
using StageModelHook =
    std::function<void(std::size_t stage_index, const StagePlan& stage,
                       ToyModel& model)>;

/// Drives run_plan end to end: packs batches, augments them against `noise`,
/// attaches labels and masks, collates, and steps `model`. Stage init
/// semantics: "scratch" rebuilds the model from its config (same seed, fresh
/// weights), "previous" keeps the weights and resets the optimizer for a
/// fresh warmup, "external" loads the named checkpoint and resets the
/// optimizer.
TrainOutcome train_plan_with_model(
    ToyModel& model, const TrainingPlan& plan, const PipelineConfig& config,
    const NoiseCache& noise, const WaveformLoader& loader,
    const std::map<std::string, FrameLabelSequence>& label_store,
    std::uint64_t seed, const StageModelHook& stage_hook = {});

}  // namespace sslforge
