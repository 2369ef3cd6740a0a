#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sslforge/augment.hpp"
#include "sslforge/labels.hpp"
#include "sslforge/manifest.hpp"
#include "sslforge/masking.hpp"

namespace sslforge {

/// Resolves an utterance record to its decoded waveform. The CLI installs a
/// WAV-reading loader; tests can synthesize in memory.
using WaveformLoader = std::function<std::vector<float>(const UtteranceRecord&)>;

/// Loader that reads `base_dir / record.path` as a WAV file and checks the
/// sample rate against the manifest.
WaveformLoader make_wav_loader(std::filesystem::path base_dir);

/// One training batch before audio is touched: indices into a manifest plus
/// the duration they add up to.
struct BatchSkeleton {
  std::vector<std::size_t> record_indices;
  double total_seconds = 0.0;
};

/// Shuffles the manifest with a seed derived from (seed, epoch) and packs the
/// shuffled order first-fit under the duration cap: each utterance goes into
/// the first already-open batch with room, or opens a new one. Every record
/// appears in exactly one batch. A single utterance longer than the cap forms
/// its own over-cap batch (packing never drops data); every other batch
/// respects the cap. cap_seconds must be positive.
std::vector<BatchSkeleton> pack_epoch(const Manifest& m, double cap_seconds,
                                      std::uint64_t seed, std::uint64_t epoch);

/// Decode-once store for mixing noise. Clips are decoded lazily on first use
/// and memoized; decode_count() exposes how many decodes actually happened so
/// tests can prove a clip is never decoded twice.
class NoiseCache {
 public:
  NoiseCache(Manifest noise_manifest, WaveformLoader loader);

  std::size_t size() const { return manifest_.records.size(); }
  const UtteranceRecord& record(std::size_t i) const {
    return manifest_.records.at(i);
  }
  /// Decoded samples for clip i (decoding it if this is the first use).
  std::span<const float> clip(std::size_t i) const;
  /// Mixing candidates for the whole pool; forces every clip decoded (once).
  std::vector<MixCandidate> all_candidates() const;
  std::size_t decode_count() const { return decodes_; }

 private:
  Manifest manifest_;
  WaveformLoader loader_;
  mutable std::mutex mutex_;
  mutable std::vector<std::optional<std::vector<float>>> clips_;
  mutable std::size_t decodes_ = 0;
};

/// A materialized batch item: augmented audio plus its reproducible plan,
/// and, once targets are attached, per-frame labels and a mask.
struct BatchItem {
  std::string id;
  std::uint32_t sample_rate = 0;
  std::vector<float> samples;
  MixPlan plan;
  FrameLabelSequence labels;
  MaskSpec mask;
};

struct Batch {
  std::vector<BatchItem> items;
  double total_seconds = 0.0;
};

/// Loads and augments the skeleton's utterances. Every item draws from its
/// own stream seeded with derive_seed(batch_seed, utterance_id), so the
/// result is independent of item processing order (threads > 1 gives
/// identical bytes). Batch peers are the other items' clean waveforms; a
/// single-item batch has no peers and skips the peer-vs-noise draw entirely.
/// The noise cache must be non-empty whenever cfg.p_augment > 0.
Batch augment_batch(const Manifest& m, const BatchSkeleton& skeleton,
                    const AugmentConfig& cfg, const NoiseCache& noise,
                    const WaveformLoader& loader, std::uint64_t batch_seed,
                    unsigned threads = 1);

/// Attaches precomputed labels (by utterance id) and a freshly sampled mask
/// to every item. Mask draws use derive_seed(derive_seed(batch_seed, id),
/// "mask"). Throws Error if the store is missing an id or the label length
/// does not match floor(samples / shift) for its frame shift.
void attach_targets(Batch& batch,
                    const std::map<std::string, FrameLabelSequence>& label_store,
                    std::uint32_t mask_span, double mask_start_probability,
                    std::uint64_t batch_seed);

enum class StageInit { kScratch, kFromPreviousStage, kFromExternal };

/// One curriculum stage: which manifest to stream, for how many steps, and
/// how the model enters the stage. Later stages typically re-balance onto a
/// low-resource subset and re-warm the optimizer.
struct StagePlan {
  std::string name;
  std::string manifest_path;  // as written in plan files
  Manifest manifest;
  std::size_t steps = 0;
  StageInit init = StageInit::kScratch;
  std::string external_model;  // used when init == kFromExternal
};

struct TrainingPlan {
  std::vector<StagePlan> stages;

  /// Structural checks: at least one stage, positive step counts, non-empty
  /// stage manifests, first stage not initialized from "previous", external
  /// init paths present. Throws Error.
  void validate() const;
};

/// Reads a plan file: {"stages": [{"name", "manifest", "steps", "init",
/// "external_model"?}]}, loading each stage manifest relative to the plan
/// file's directory. init is "scratch", "previous", or "external".
TrainingPlan load_training_plan(const std::filesystem::path& path);
void save_training_plan(const TrainingPlan& plan,
                        const std::filesystem::path& path);

struct StageSummary {
  std::string name;
  std::size_t steps = 0;
  std::size_t epochs_started = 0;
  double mean_loss = 0.0;
  double wall_seconds = 0.0;
};

using MaterializeBatchFn =
    std::function<Batch(std::size_t stage_index, const StagePlan& stage,
                        const BatchSkeleton& skeleton, std::uint64_t batch_seed)>;
using TrainStepFn = std::function<double(std::size_t stage_index,
                                         std::size_t step, const Batch& batch)>;
using StageBeginFn =
    std::function<void(std::size_t stage_index, const StagePlan& stage)>;

/// Streams exactly `steps` batches per stage through the trainer, walking
/// epoch after epoch of pack_epoch skeletons (reshuffled per epoch) until the
/// stage's budget is spent. on_stage_begin fires before a stage's first
/// batch; model/optimizer handling (reset, checkpoint loading) is the
/// caller's job there. Seeds: stage_seed = derive_seed(seed, "stage/<i>"),
/// epoch shuffles use stage_seed, batch_seed = derive_seed(stage_seed,
/// "step/<t>"). Callback errors are rethrown with stage/step context.
std::vector<StageSummary> run_plan(const TrainingPlan& plan,
                                   double cap_seconds, std::uint64_t seed,
                                   const MaterializeBatchFn& materialize,
                                   const TrainStepFn& train_step,
                                   const StageBeginFn& on_stage_begin = {});

}  // namespace sslforge
