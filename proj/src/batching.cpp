#include "sslforge/batching.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "sslforge/rng.hpp"
#include "sslforge/util.hpp"
#include "sslforge/wav.hpp"

namespace sslforge {

WaveformLoader make_wav_loader(std::filesystem::path base_dir) {
  return [base_dir = std::move(base_dir)](const UtteranceRecord& rec) {
    std::filesystem::path p(rec.path);
    if (p.is_relative()) p = base_dir / p;
    WavData wav = read_wav(p);
    if (wav.sample_rate != rec.sample_rate) {
      throw Error("utterance '" + rec.id + "': manifest says " +
                  std::to_string(rec.sample_rate) + " Hz but " + p.string() +
                  " is " + std::to_string(wav.sample_rate) + " Hz");
    }
    return std::move(wav.samples);
  };
}

std::vector<BatchSkeleton> pack_epoch(const Manifest& m, double cap_seconds,
                                      std::uint64_t seed, std::uint64_t epoch) {
  if (!(cap_seconds > 0.0) || !std::isfinite(cap_seconds)) {
    throw Error("pack_epoch: cap_seconds must be positive and finite");
  }
  const std::size_t n = m.records.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  // Fisher-Yates with an epoch-derived stream: every epoch reshuffles, and
  // the sequence of epochs is reproducible from the base seed.
  Rng rng(derive_seed(seed, epoch));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(order[i - 1], order[j]);
  }

  std::vector<BatchSkeleton> batches;
  for (const std::size_t idx : order) {
    const double dur = m.records[idx].duration;
    bool placed = false;
    for (auto& batch : batches) {
      if (batch.total_seconds + dur <= cap_seconds) {
        batch.record_indices.push_back(idx);
        batch.total_seconds += dur;
        placed = true;
        break;
      }
    }
    if (!placed) {
      // Opens a new batch even when dur alone exceeds the cap: packing never
      // drops an utterance, so an oversized clip rides alone.
      batches.push_back(BatchSkeleton{{idx}, dur});
    }
  }
  return batches;
}

NoiseCache::NoiseCache(Manifest noise_manifest, WaveformLoader loader)
    : manifest_(std::move(noise_manifest)), loader_(std::move(loader)) {
  validate_manifest(manifest_);
  if (!loader_) {
    throw Error("NoiseCache: a waveform loader is required");
  }
  clips_.resize(manifest_.records.size());
}

std::span<const float> NoiseCache::clip(std::size_t i) const {
  if (i >= clips_.size()) {
    throw Error("NoiseCache: clip index " + std::to_string(i) +
                " out of range");
  }
  const std::lock_guard<std::mutex> lock(mutex_);
  if (!clips_[i].has_value()) {
    clips_[i] = loader_(manifest_.records[i]);
    ++decodes_;
  }
  return *clips_[i];
}

std::vector<MixCandidate> NoiseCache::all_candidates() const {
  std::vector<MixCandidate> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) {
    out.push_back(MixCandidate{manifest_.records[i].id, clip(i)});
  }
  return out;
}

Batch augment_batch(const Manifest& m, const BatchSkeleton& skeleton,
                    const AugmentConfig& cfg, const NoiseCache& noise,
                    const WaveformLoader& loader, std::uint64_t batch_seed,
                    unsigned threads) {
  cfg.validate();
  if (skeleton.record_indices.empty()) {
    throw Error("augment_batch: empty batch skeleton");
  }
  if (cfg.p_augment > 0.0 && noise.size() == 0) {
    throw Error("augment_batch: augmentation is enabled but the noise cache "
                "is empty");
  }
  const std::size_t n = skeleton.record_indices.size();
  std::vector<const UtteranceRecord*> records(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t idx = skeleton.record_indices[i];
    if (idx >= m.records.size()) {
      throw Error("augment_batch: record index " + std::to_string(idx) +
                  " out of range");
    }
    records[i] = &m.records[idx];
  }

  // Phase 1: decode the clean waveforms (peers must all exist before any
  // item can mix with them).
  std::vector<std::vector<float>> clean(n);
  parallel_for(n, threads, [&](std::size_t i) { clean[i] = loader(*records[i]); });

  const std::vector<MixCandidate> noise_pool = noise.all_candidates();
  const bool multi = n > 1;

  // Phase 2: every item augments independently under its own derived seed,
  // so the loop order (and thread count) cannot change the output.
  Batch batch;
  batch.total_seconds = skeleton.total_seconds;
  batch.items.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const UtteranceRecord& rec = *records[i];
    std::vector<MixCandidate> peers;
    if (multi) {
      peers.reserve(n - 1);
      for (std::size_t j = 0; j < n; ++j) {
        if (j != i) peers.push_back(MixCandidate{records[j]->id, clean[j]});
      }
    }
    Rng rng(derive_seed(batch_seed, rec.id));
    AugmentedUtterance aug =
        augment_utterance(rec.id, clean[i], peers, noise_pool, cfg, rng,
                          /*allow_utterance_mixing=*/multi);
    BatchItem& item = batch.items[i];
    item.id = rec.id;
    item.sample_rate = rec.sample_rate;
    item.samples = std::move(aug.samples);
    item.plan = std::move(aug.plan);
  });
  return batch;
}

void attach_targets(Batch& batch,
                    const std::map<std::string, FrameLabelSequence>& label_store,
                    std::uint32_t mask_span, double mask_start_probability,
                    std::uint64_t batch_seed) {
  for (auto& item : batch.items) {
    const auto it = label_store.find(item.id);
    if (it == label_store.end()) {
      throw Error("attach_targets: no labels for utterance '" + item.id + "'");
    }
    item.labels = it->second;
    const auto shift_samples = static_cast<std::size_t>(
        item.labels.frame_shift_ms * (item.sample_rate / 1000));
    if (shift_samples == 0) {
      throw Error("attach_targets: invalid frame shift for '" + item.id + "'");
    }
    const std::size_t expected = item.samples.size() / shift_samples;
    if (item.labels.labels.size() != expected) {
      throw Error("attach_targets: '" + item.id + "' has " +
                  std::to_string(item.labels.labels.size()) +
                  " labels but the waveform spans " + std::to_string(expected) +
                  " frames at " + std::to_string(item.labels.frame_shift_ms) +
                  " ms");
    }
    Rng rng(derive_seed(derive_seed(batch_seed, item.id), "mask"));
    item.mask = sample_mask(static_cast<std::uint32_t>(expected), mask_span,
                            mask_start_probability, rng);
  }
}

void TrainingPlan::validate() const {
  if (stages.empty()) {
    throw Error("training plan has no stages");
  }
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const StagePlan& s = stages[i];
    const std::string where = "stage " + std::to_string(i) +
                              (s.name.empty() ? "" : " ('" + s.name + "')");
    if (s.steps == 0) {
      throw Error(where + ": steps must be >= 1");
    }
    if (s.manifest.records.empty()) {
      throw Error(where + ": stage manifest is empty");
    }
    if (i == 0 && s.init == StageInit::kFromPreviousStage) {
      throw Error(where + ": the first stage cannot initialize from the "
                          "previous stage");
    }
    if (s.init == StageInit::kFromExternal && s.external_model.empty()) {
      throw Error(where + ": external init requires external_model");
    }
  }
}

namespace {

std::string_view stage_init_name(StageInit init) {
  switch (init) {
    case StageInit::kScratch:
      return "scratch";
    case StageInit::kFromPreviousStage:
      return "previous";
    case StageInit::kFromExternal:
      return "external";
  }
  return "scratch";
}

StageInit parse_stage_init(const std::string& name) {
  if (name == "scratch") return StageInit::kScratch;
  if (name == "previous") return StageInit::kFromPreviousStage;
  if (name == "external") return StageInit::kFromExternal;
  throw Error("invalid stage init '" + name +
              "' (expected scratch, previous, or external)");
}

}  // namespace

TrainingPlan load_training_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open training plan: " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid training plan json in " + path.string() + ": " +
                e.what());
  }
  TrainingPlan plan;
  try {
    for (const auto& js : j.at("stages")) {
      StagePlan s;
      s.name = js.at("name").get<std::string>();
      s.manifest_path = js.at("manifest").get<std::string>();
      s.steps = js.at("steps").get<std::size_t>();
      s.init = parse_stage_init(js.at("init").get<std::string>());
      if (js.contains("external_model")) {
        s.external_model = js.at("external_model").get<std::string>();
      }
      plan.stages.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid training plan in " + path.string() + ": " + e.what());
  }
  for (auto& s : plan.stages) {
    std::filesystem::path mp(s.manifest_path);
    if (mp.is_relative()) mp = path.parent_path() / mp;
    s.manifest = load_manifest(mp);
  }
  plan.validate();
  return plan;
}

void save_training_plan(const TrainingPlan& plan,
                        const std::filesystem::path& path) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : plan.stages) {
    nlohmann::json js{
        {"name", s.name},
        {"manifest", s.manifest_path},
        {"steps", s.steps},
        {"init", std::string(stage_init_name(s.init))},
    };
    if (!s.external_model.empty()) js["external_model"] = s.external_model;
    stages.push_back(std::move(js));
  }
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write training plan: " + path.string());
  }
  out << nlohmann::json{{"stages", stages}}.dump(2) << '\n';
  if (!out) {
    throw Error("short write to training plan: " + path.string());
  }
}

std::vector<StageSummary> run_plan(const TrainingPlan& plan,
                                   double cap_seconds, std::uint64_t seed,
                                   const MaterializeBatchFn& materialize,
                                   const TrainStepFn& train_step,
                                   const StageBeginFn& on_stage_begin) {
  plan.validate();
  if (!materialize || !train_step) {
    throw Error("run_plan: materialize and train_step callbacks are required");
  }

  std::vector<StageSummary> summaries;
  for (std::size_t si = 0; si < plan.stages.size(); ++si) {
    const StagePlan& stage = plan.stages[si];
    const std::uint64_t stage_seed =
        derive_seed(seed, "stage/" + std::to_string(si));

    StageSummary summary;
    summary.name = stage.name;
    const auto t0 = std::chrono::steady_clock::now();

    auto with_context = [&](std::size_t step, const char* what,
                            const std::exception& e) -> Error {
      return Error("stage " + std::to_string(si) + " ('" + stage.name +
                   "') step " + std::to_string(step) + ": " + what + ": " +
                   e.what());
    };

    if (on_stage_begin) {
      try {
        on_stage_begin(si, stage);
      } catch (const std::exception& e) {
        throw Error("stage " + std::to_string(si) + " ('" + stage.name +
                    "') initialization: " + e.what());
      }
    }

    double loss_sum = 0.0;
    std::size_t step = 0;
    std::uint64_t epoch = 0;
    while (step < stage.steps) {
      const std::vector<BatchSkeleton> skeletons =
          pack_epoch(stage.manifest, cap_seconds, stage_seed, epoch);
      ++epoch;
      summary.epochs_started = epoch;
      for (const auto& skeleton : skeletons) {
        if (step >= stage.steps) break;
        const std::uint64_t batch_seed =
            derive_seed(stage_seed, "step/" + std::to_string(step));
        Batch batch;
        try {
          batch = materialize(si, stage, skeleton, batch_seed);
        } catch (const std::exception& e) {
          throw with_context(step, "batch materialization failed", e);
        }
        double loss = 0.0;
        try {
          loss = train_step(si, step, batch);
        } catch (const std::exception& e) {
          throw with_context(step, "training step failed", e);
        }
        loss_sum += loss;
        ++step;
      }
    }
    summary.steps = step;
    summary.mean_loss = step > 0 ? loss_sum / static_cast<double>(step) : 0.0;
    summary.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    summaries.push_back(std::move(summary));
  }
  return summaries;
}

}  // namespace sslforge
