#include "sslforge/demo.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include "sslforge/pipeline.hpp"
#include "sslforge/scoring.hpp"
#include "sslforge/synth.hpp"
#include "sslforge/util.hpp"

namespace sslforge {

// ---------------------------------------------------------------------------
// Pipeline helpers shared with the CLI.

void PipelineConfig::validate() const {
  augment.validate();
  if (fuse_shifts_ms.empty()) {
    throw Error("pipeline: at least one frame shift is required");
  }
  for (const int s : fuse_shifts_ms) {
    if (!is_valid_frame_shift(s)) {
      throw Error("pipeline: invalid frame shift " + std::to_string(s) + " ms");
    }
  }
  if (mask_span == 0) {
    throw Error("pipeline: mask span must be >= 1");
  }
  if (!(mask_start_probability >= 0.0 && mask_start_probability <= 1.0)) {
    throw Error("pipeline: mask start probability must be in [0, 1]");
  }
  if (!(batch_cap_seconds > 0.0)) {
    throw Error("pipeline: batch cap must be positive");
  }
}

FrameFeatureSequence extract_fused_features(std::span<const float> samples,
                                            std::uint32_t sample_rate,
                                            std::span<const int> shifts_ms,
                                            const std::string& id) {
  std::vector<FrameFeatureSequence> streams;
  streams.reserve(shifts_ms.size());
  for (const int shift : shifts_ms) {
    streams.push_back(extract_features(samples, sample_rate, shift, id));
  }
  if (streams.size() == 1) return std::move(streams.front());
  return fuse_multires(streams);
}

CollatedBatch collate_batch(const Batch& batch, std::span<const int> shifts_ms) {
  if (batch.items.empty()) {
    throw Error("collate_batch: empty batch");
  }
  CollatedBatch out;
  out.labels.source_id = "batch";
  out.features.source_id = "batch";
  std::uint32_t offset = 0;
  for (const auto& item : batch.items) {
    FrameFeatureSequence fused =
        extract_fused_features(item.samples, item.sample_rate, shifts_ms,
                               item.id);
    if (item.labels.labels.size() != fused.frames()) {
      throw Error("collate_batch: '" + item.id + "' has " +
                  std::to_string(item.labels.labels.size()) + " labels for " +
                  std::to_string(fused.frames()) + " fused frames");
    }
    if (out.features.dim == 0) {
      out.features.dim = fused.dim;
      out.features.frame_shift_ms = fused.frame_shift_ms;
      out.labels.frame_shift_ms = item.labels.frame_shift_ms;
    } else if (fused.dim != out.features.dim) {
      throw Error("collate_batch: inconsistent feature dims across items");
    }
    out.features.data.insert(out.features.data.end(), fused.data.begin(),
                             fused.data.end());
    out.labels.labels.insert(out.labels.labels.end(),
                             item.labels.labels.begin(),
                             item.labels.labels.end());
    for (const std::uint32_t t : item.mask.masked) {
      out.mask.masked.push_back(offset + t);
    }
    offset += static_cast<std::uint32_t>(fused.frames());
  }
  out.mask.total_frames = offset;
  out.mask.span = batch.items.front().mask.span;
  out.mask.start_probability = batch.items.front().mask.start_probability;
  return out;
}

TrainOutcome train_plan_with_model(
    ToyModel& model, const TrainingPlan& plan, const PipelineConfig& config,
    const NoiseCache& noise, const WaveformLoader& loader,
    const std::map<std::string, FrameLabelSequence>& label_store,
    std::uint64_t seed, const StageModelHook& stage_hook) {
  config.validate();
  TrainOutcome outcome;

  const auto materialize = [&](std::size_t, const StagePlan& stage,
                               const BatchSkeleton& skeleton,
                               std::uint64_t batch_seed) {
    Batch batch = augment_batch(stage.manifest, skeleton, config.augment, noise,
                                loader, batch_seed, config.threads);
    attach_targets(batch, label_store, config.mask_span,
                   config.mask_start_probability, batch_seed);
    return batch;
  };

  const auto train_step = [&](std::size_t, std::size_t, const Batch& batch) {
    for (const auto& item : batch.items) {
      outcome.items_seen += 1;
      if (item.plan.augmented) {
        outcome.items_augmented += 1;
        if (item.plan.source_kind == MixSource::kUtterance) {
          outcome.items_peer_mixed += 1;
        } else {
          outcome.items_noise_mixed += 1;
        }
      }
    }
    const CollatedBatch collated = collate_batch(batch, config.fuse_shifts_ms);
    const LossResult result =
        model.train_step(collated.features, collated.labels, collated.mask);
    if (result.empty_mask) outcome.empty_mask_steps += 1;
    return result.loss;
  };

  const auto on_stage_begin = [&](std::size_t si, const StagePlan& stage) {
    switch (stage.init) {
      case StageInit::kScratch:
        if (si > 0) model = ToyModel(model.config());
        break;
      case StageInit::kFromPreviousStage:
        model.reset_optimizer();
        break;
      case StageInit::kFromExternal:
        model = ToyModel::load(stage.external_model);
        model.reset_optimizer();
        break;
    }
    if (stage_hook) stage_hook(si, stage, model);
  };

  outcome.summaries = run_plan(plan, config.batch_cap_seconds, seed,
                               materialize, train_step, on_stage_begin);
  return outcome;
}

// ---------------------------------------------------------------------------
// Demo.

namespace {

struct RunArtifacts {
  std::vector<StageSummary> summaries;
  TrainOutcome outcome;
  ManifestStats stats;
  std::map<std::string, double> scores;
};

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << j.dump(2) << '\n';
}

std::string label_string(std::span<const std::uint32_t> labels) {
  // Map label indices to letters so label sequences can be compared with the
  // text-level error-rate machinery ('a' + label; codebooks here are small).
  std::string s;
  s.reserve(labels.size());
  for (const std::uint32_t l : labels) {
    s.push_back(static_cast<char>('a' + (l % 26)));
  }
  return s;
}

RunArtifacts run_pipeline_once(const std::filesystem::path& run_dir,
                               const std::filesystem::path& data_dir,
                               const DemoOptions& options) {
  std::filesystem::create_directories(run_dir);
  const WaveformLoader loader = make_wav_loader(data_dir);

  // Curation: drop over-long clips, report the balance, carve the
  // low-resource slice used by the second curriculum stage.
  const Manifest full = load_manifest(data_dir / "manifest.tsv");
  const Manifest filtered = filter_max_duration(full, 15.0);
  // Saved copies get their audio paths re-expressed relative to the run
  // directory, so the on-disk plan stays runnable as-is.
  save_manifest(rebase_manifest_paths(filtered, data_dir, run_dir),
                run_dir / "filtered.tsv");
  const ManifestStats stats = compute_stats(filtered, options.threads);
  write_json(run_dir / "stats.json", stats_to_json(stats, 5));
  const Manifest stage2 =
      subset_by_corpus(filtered, {Corpus::kFleurs, Corpus::kBabel});
  save_manifest(rebase_manifest_paths(stage2, data_dir, run_dir),
                run_dir / "stage2.tsv");

  // Pseudo-labels: cluster clean 20 ms features, assign, then coarsen.
  std::vector<double> pooled;
  std::vector<FrameFeatureSequence> clean_features;
  for (const auto& rec : filtered.records) {
    const std::vector<float> samples = loader(rec);
    FrameFeatureSequence f =
        extract_features(samples, rec.sample_rate, 20, rec.id);
    pooled.insert(pooled.end(), f.data.begin(), f.data.end());
    clean_features.push_back(std::move(f));
  }
  const std::size_t dim = clean_features.front().dim;
  KmeansResult km = train_kmeans(pooled, dim, options.kmeans_clusters,
                                 derive_seed(options.seed, "kmeans"));
  km.codebook.trained_on = "filtered.tsv";
  save_codebook(km.codebook, run_dir / "codebook.bin");

  std::vector<FrameLabelSequence> labels20;
  std::vector<FrameLabelSequence> labels40;
  std::vector<FrameLabelSequence> labels80;
  std::map<std::string, FrameLabelSequence> label_store;
  for (const auto& f : clean_features) {
    FrameLabelSequence l20 = assign_labels(f, km.codebook);
    labels40.push_back(downsample_labels(l20, 2));
    labels80.push_back(downsample_labels(l20, 4));
    label_store[l20.source_id] = l20;
    labels20.push_back(std::move(l20));
  }
  save_labels_jsonl(labels20, run_dir / "labels_20ms.jsonl");
  save_labels_jsonl(labels40, run_dir / "labels_40ms.jsonl");
  save_labels_jsonl(labels80, run_dir / "labels_80ms.jsonl");

  // Two-stage curriculum: broad mix first, then re-balance onto the
  // low-resource slice with a fresh optimizer.
  TrainingPlan plan;
  StagePlan s1;
  s1.name = "stage1";
  s1.manifest_path = "filtered.tsv";
  s1.manifest = filtered;
  s1.steps = options.stage1_steps;
  s1.init = StageInit::kScratch;
  StagePlan s2;
  s2.name = "stage2";
  s2.manifest_path = "stage2.tsv";
  s2.manifest = stage2;
  s2.steps = options.stage2_steps;
  s2.init = StageInit::kFromPreviousStage;
  plan.stages = {std::move(s1), std::move(s2)};
  save_training_plan(plan, run_dir / "plan.json");

  PipelineConfig pipeline;
  pipeline.threads = options.threads;

  NoiseCache noise(load_manifest(data_dir / "noise.tsv"), loader);

  ToyModelConfig model_cfg;
  model_cfg.input_dim = 3 * dim;  // 20 + 40 + 80 ms streams fused
  model_cfg.hidden_dims = {32, 32};
  model_cfg.num_classes = options.kmeans_clusters;
  model_cfg.peak_learning_rate = 5e-3;
  model_cfg.warmup_steps = 10;
  model_cfg.seed = derive_seed(options.seed, "model");
  ToyModel model(model_cfg);

  const StageModelHook hook = [&](std::size_t si, const StagePlan&,
                                  ToyModel& m) {
    if (si == 1) m.save(run_dir / "model_stage1.bin");
  };
  RunArtifacts artifacts;
  artifacts.outcome =
      train_plan_with_model(model, plan, pipeline, noise, loader, label_store,
                            derive_seed(options.seed, "train"), hook);
  artifacts.summaries = artifacts.outcome.summaries;
  model.save(run_dir / "model.bin");

  nlohmann::json summaries = nlohmann::json::array();
  for (const auto& s : artifacts.summaries) {
    // Wall-clock time stays out of this file so run_a and run_b can be
    // compared byte for byte; timings go into the top-level report only.
    summaries.push_back({{"name", s.name},
                         {"steps", s.steps},
                         {"epochs_started", s.epochs_started},
                         {"mean_loss", s.mean_loss}});
  }
  write_json(run_dir / "summaries.json",
             {{"stages", summaries},
              {"items_seen", artifacts.outcome.items_seen},
              {"items_augmented", artifacts.outcome.items_augmented},
              {"items_peer_mixed", artifacts.outcome.items_peer_mixed},
              {"items_noise_mixed", artifacts.outcome.items_noise_mixed},
              {"noise_decodes", noise.decode_count()}});

  // Score the stage-1 and final checkpoints on frame accuracy and on the
  // error rate of their decoded label strings, then aggregate.
  const ToyModel stage1_model = ToyModel::load(run_dir / "model_stage1.bin");
  const std::vector<std::pair<std::string, const ToyModel*>> checkpoints = {
      {"stage1", &stage1_model},
      {"final", &model},
  };
  std::vector<TaskResult> results;
  for (const auto& [name, checkpoint] : checkpoints) {
    std::size_t correct = 0;
    std::size_t total = 0;
    double cer_sum = 0.0;
    std::size_t cer_count = 0;
    for (const auto& rec : filtered.records) {
      const std::vector<float> samples = loader(rec);
      const FrameFeatureSequence fused = extract_fused_features(
          samples, rec.sample_rate, pipeline.fuse_shifts_ms, rec.id);
      if (fused.frames() == 0) continue;
      MaskSpec no_mask;
      no_mask.total_frames = static_cast<std::uint32_t>(fused.frames());
      no_mask.span = pipeline.mask_span;
      const std::vector<double> logprobs = checkpoint->forward(fused, no_mask);
      const auto& reference = label_store.at(rec.id).labels;
      std::vector<std::uint32_t> predicted(fused.frames());
      for (std::size_t t = 0; t < fused.frames(); ++t) {
        const auto* row = logprobs.data() + t * model_cfg.num_classes;
        predicted[t] = static_cast<std::uint32_t>(
            std::max_element(row, row + model_cfg.num_classes) - row);
        if (predicted[t] == reference[t]) ++correct;
        ++total;
      }
      cer_sum += cer(label_string(predicted), label_string(reference));
      cer_count += 1;
    }
    TaskResult acc;
    acc.model = name;
    acc.task = "frame-acc";
    acc.metric = Metric::kAccuracy;
    acc.value = total > 0 ? 100.0 * static_cast<double>(correct) /
                                static_cast<double>(total)
                          : 0.0;
    TaskResult cer_result;
    cer_result.model = name;
    cer_result.task = "label-cer";
    cer_result.metric = Metric::kCer;
    cer_result.value = cer_count > 0 ? cer_sum / static_cast<double>(cer_count)
                                     : 0.0;
    results.push_back(std::move(acc));
    results.push_back(std::move(cer_result));
  }
  artifacts.scores = superb_score(results);
  nlohmann::json score_json = nlohmann::json::object();
  for (const auto& [model_name, score] : artifacts.scores) {
    score_json[model_name] = score;
  }
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& r : results) {
    cells.push_back({{"model", r.model},
                     {"task", r.task},
                     {"metric", r.metric == Metric::kAccuracy ? "acc" : "cer"},
                     {"value", r.value}});
  }
  write_json(run_dir / "scores.json",
             {{"results", cells}, {"aggregate", score_json}});

  artifacts.stats = stats;
  return artifacts;
}

std::map<std::string, std::string> fingerprint_dir(
    const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::map<std::string, std::string> out;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    std::ostringstream hex;
    hex << std::hex << fnv1a(bytes);
    out[std::filesystem::relative(f, dir).generic_string()] = hex.str();
  }
  return out;
}

}  // namespace

nlohmann::json run_demo(const std::filesystem::path& out_dir,
                        const DemoOptions& options) {
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path data_dir = out_dir / "data";

  // Shared inputs, generated once: a speech-like corpus and a noise pool.
  Manifest speech = write_synthetic_corpus(
      data_dir, demo_speech_specs(options.seed), 16000);
  save_manifest(speech, data_dir / "manifest.tsv");
  Manifest noise = write_synthetic_corpus(
      data_dir, demo_noise_specs(options.seed), 16000);
  save_manifest(noise, data_dir / "noise.tsv");

  // The whole pipeline, twice, same seed.
  const auto t_a = std::chrono::steady_clock::now();
  const RunArtifacts run_a =
      run_pipeline_once(out_dir / "run_a", data_dir, options);
  const auto t_b = std::chrono::steady_clock::now();
  run_pipeline_once(out_dir / "run_b", data_dir, options);
  const auto t_end = std::chrono::steady_clock::now();

  const auto files_a = fingerprint_dir(out_dir / "run_a");
  const auto files_b = fingerprint_dir(out_dir / "run_b");
  const bool deterministic = files_a == files_b;

  nlohmann::json stage_json = nlohmann::json::array();
  for (const auto& s : run_a.summaries) {
    stage_json.push_back({{"name", s.name},
                          {"steps", s.steps},
                          {"epochs_started", s.epochs_started},
                          {"mean_loss", s.mean_loss},
                          {"wall_seconds", s.wall_seconds}});
  }
  nlohmann::json fingerprints_a = nlohmann::json::object();
  for (const auto& [path, hash] : files_a) fingerprints_a[path] = hash;
  nlohmann::json fingerprints_b = nlohmann::json::object();
  for (const auto& [path, hash] : files_b) fingerprints_b[path] = hash;
  nlohmann::json scores = nlohmann::json::object();
  for (const auto& [model_name, score] : run_a.scores) {
    scores[model_name] = score;
  }

  const nlohmann::json report{
      {"seed", options.seed},
      {"deterministic", deterministic},
      {"stats", stats_to_json(run_a.stats, 5)},
      {"stages", stage_json},
      {"scores", scores},
      {"augmented_items", run_a.outcome.items_augmented},
      {"items_seen", run_a.outcome.items_seen},
      {"fingerprints", {{"run_a", fingerprints_a}, {"run_b", fingerprints_b}}},
      {"wall_seconds",
       {{"run_a", std::chrono::duration<double>(t_b - t_a).count()},
        {"run_b", std::chrono::duration<double>(t_end - t_b).count()}}},
  };
  write_json(out_dir / "report.json", report);
  if (!deterministic) {
    throw Error("demo: run_a and run_b artifacts differ; see " +
                (out_dir / "report.json").string());
  }
  return report;
}

}  // namespace sslforge
