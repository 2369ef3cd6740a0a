// sslforge: corpus curation, mixing augmentation, pseudo-labeling, batch
// scheduling, desk-scale masked-prediction training, and score aggregation
// for speech SSL data pipelines.
//
// Global conventions:
//  * --seed wins over a "seed" key in --config, which wins over the
//    SSLFORGE_SEED environment variable, which wins over the default (0).
//    Every other option follows the same flag > config > default rule.
//  * all diagnostics are JSON on stderr with a nonzero exit code;
//  * commands that create a run directory write effective_config.json there,
//    recording exactly the settings the run used.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sslforge/augment.hpp"
#include "sslforge/batching.hpp"
#include "sslforge/demo.hpp"
#include "sslforge/features.hpp"
#include "sslforge/kernels.hpp"
#include "sslforge/kmeans.hpp"
#include "sslforge/labels.hpp"
#include "sslforge/manifest.hpp"
#include "sslforge/masking.hpp"
#include "sslforge/pipeline.hpp"
#include "sslforge/scoring.hpp"
#include "sslforge/synth.hpp"
#include "sslforge/toymodel.hpp"
#include "sslforge/util.hpp"
#include "sslforge/wav.hpp"

namespace {

using nlohmann::json;
using namespace sslforge;

// ---------------------------------------------------------------------------
// Option plumbing.

struct GlobalOptions {
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::string config_path;
  json config = json::object();

  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
};

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open config file: " + path);
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("invalid config json in " + path + ": " + e.what());
  }
  if (!j.is_object()) {
    throw Error("config file must hold a json object: " + path);
  }
  return j;
}

/// flag > config > default: a value bound to a CLI option keeps its parsed
/// value if the flag appeared; otherwise a matching config key replaces the
/// default.
template <typename T>
void apply_config(const GlobalOptions& g, const CLI::Option* opt,
                  const char* key, T& value) {
  if (opt != nullptr && opt->count() > 0) return;
  if (!g.config.contains(key)) return;
  try {
    value = g.config.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(std::string("config key '") + key + "': " + e.what());
  }
}

void resolve_globals(GlobalOptions& g) {
  if (!g.config_path.empty()) {
    g.config = load_config_file(g.config_path);
  }
  apply_config(g, g.seed_opt, "seed", g.seed);
  apply_config(g, g.threads_opt, "threads", g.threads);
  if (g.seed_opt->count() == 0 && !g.config.contains("seed")) {
    if (const char* env = std::getenv("SSLFORGE_SEED")) {
      try {
        std::size_t used = 0;
        g.seed = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument(env);
      } catch (const std::exception&) {
        throw Error(std::string("SSLFORGE_SEED is not a valid seed: '") + env +
                    "'");
      }
    }
  }
  if (g.threads == 0) {
    throw Error("--threads must be >= 1");
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << j.dump(2) << '\n';
}

std::set<Corpus> parse_corpora_list(const std::string& csv) {
  std::set<Corpus> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.insert(parse_corpus(item));
  }
  if (out.empty()) {
    throw Error("no corpora given (expected e.g. FLEURS,BABEL)");
  }
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot open " + path.string());
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::map<std::string, FrameLabelSequence> label_store_from_file(
    const std::filesystem::path& path) {
  std::map<std::string, FrameLabelSequence> store;
  for (auto& seq : load_labels_jsonl(path)) {
    const std::string id = seq.source_id;
    if (!store.emplace(id, std::move(seq)).second) {
      throw Error("duplicate labels for utterance '" + id + "' in " +
                  path.string());
    }
  }
  return store;
}

// ---------------------------------------------------------------------------
// manifest subcommands

struct ManifestStatsArgs {
  std::string manifest;
  std::size_t top_k = 15;
  CLI::Option* top_opt = nullptr;
};

int run_manifest_stats(const GlobalOptions& g, const ManifestStatsArgs& a) {
  std::size_t top_k = a.top_k;
  apply_config(g, a.top_opt, "top", top_k);
  const Manifest m = load_manifest(a.manifest);
  const ManifestStats stats = compute_stats(m, g.threads);
  std::cout << stats_to_json(stats, top_k).dump(2) << '\n';
  return 0;
}

struct ManifestFilterArgs {
  std::string manifest;
  std::string output;
  double max_seconds = 15.0;
  CLI::Option* max_opt = nullptr;
};

int run_manifest_filter(const GlobalOptions& g, const ManifestFilterArgs& a) {
  double max_seconds = a.max_seconds;
  apply_config(g, a.max_opt, "max-seconds", max_seconds);
  const Manifest m = load_manifest(a.manifest);
  const Manifest kept = rebase_manifest_paths(
      filter_max_duration(m, max_seconds),
      std::filesystem::path(a.manifest).parent_path(),
      std::filesystem::path(a.output).parent_path());
  save_manifest(kept, a.output);
  std::cout << json{{"input_records", m.records.size()},
                    {"kept_records", kept.records.size()},
                    {"max_seconds", max_seconds},
                    {"output", a.output}}
                   .dump(2)
            << '\n';
  return 0;
}

struct ManifestSubsetArgs {
  std::string manifest;
  std::string output;
  std::string corpora;
};

int run_manifest_subset(const GlobalOptions&, const ManifestSubsetArgs& a) {
  const Manifest m = load_manifest(a.manifest);
  const Manifest kept = rebase_manifest_paths(
      subset_by_corpus(m, parse_corpora_list(a.corpora)),
      std::filesystem::path(a.manifest).parent_path(),
      std::filesystem::path(a.output).parent_path());
  save_manifest(kept, a.output);
  std::cout << json{{"input_records", m.records.size()},
                    {"kept_records", kept.records.size()},
                    {"corpora", a.corpora},
                    {"output", a.output}}
                   .dump(2)
            << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// augment

struct AugmentArgs {
  std::string manifest;
  std::string noise;
  std::string output;
  AugmentConfig cfg;
  bool full_energies = false;
  CLI::Option* p_augment_opt = nullptr;
  CLI::Option* p_utterance_opt = nullptr;
  CLI::Option* retries_opt = nullptr;
  CLI::Option* full_energies_opt = nullptr;
  CLI::Option* literal_opt = nullptr;
  CLI::Option* snr_utt_lo_opt = nullptr;
  CLI::Option* snr_utt_hi_opt = nullptr;
  CLI::Option* snr_noise_lo_opt = nullptr;
  CLI::Option* snr_noise_hi_opt = nullptr;
};

json augment_config_to_json(const AugmentConfig& cfg) {
  return json{
      {"p-augment", cfg.p_augment},
      {"p-utterance", cfg.p_utterance},
      {"snr-utterance-lo", cfg.snr_db_utterance.lo},
      {"snr-utterance-hi", cfg.snr_db_utterance.hi},
      {"snr-noise-lo", cfg.snr_db_noise.lo},
      {"snr-noise-hi", cfg.snr_db_noise.hi},
      {"retries", cfg.silent_source_retries},
      {"window-energies", cfg.window_energies},
      {"literal-scale", cfg.literal_scale},
  };
}

void resolve_augment_config(const GlobalOptions& g, AugmentArgs& a) {
  apply_config(g, a.p_augment_opt, "p-augment", a.cfg.p_augment);
  apply_config(g, a.p_utterance_opt, "p-utterance", a.cfg.p_utterance);
  apply_config(g, a.retries_opt, "retries", a.cfg.silent_source_retries);
  apply_config(g, a.full_energies_opt, "full-energies", a.full_energies);
  apply_config(g, a.literal_opt, "literal-scale", a.cfg.literal_scale);
  apply_config(g, a.snr_utt_lo_opt, "snr-utterance-lo", a.cfg.snr_db_utterance.lo);
  apply_config(g, a.snr_utt_hi_opt, "snr-utterance-hi", a.cfg.snr_db_utterance.hi);
  apply_config(g, a.snr_noise_lo_opt, "snr-noise-lo", a.cfg.snr_db_noise.lo);
  apply_config(g, a.snr_noise_hi_opt, "snr-noise-hi", a.cfg.snr_db_noise.hi);
  a.cfg.window_energies = !a.full_energies;
  a.cfg.validate();
}

int run_augment(const GlobalOptions& g, AugmentArgs& a) {
  resolve_augment_config(g, a);
  const Manifest m = load_manifest(a.manifest);
  if (m.records.empty()) {
    throw Error("augment: manifest has no records");
  }
  const std::filesystem::path manifest_dir =
      std::filesystem::path(a.manifest).parent_path();
  const WaveformLoader loader = make_wav_loader(manifest_dir);
  NoiseCache noise(load_manifest(a.noise),
                   make_wav_loader(std::filesystem::path(a.noise).parent_path()));

  std::filesystem::create_directories(a.output);
  write_json_file(std::filesystem::path(a.output) / "effective_config.json",
                  json{{"seed", g.seed},
                       {"threads", g.threads},
                       {"augment", augment_config_to_json(a.cfg)}});

  // Load every clean waveform first: the peer pool for each utterance is all
  // the other utterances of the manifest.
  const std::size_t n = m.records.size();
  std::vector<std::vector<float>> clean(n);
  parallel_for(n, g.threads,
               [&](std::size_t i) { clean[i] = loader(m.records[i]); });
  const std::vector<MixCandidate> noise_pool = noise.all_candidates();

  // Each utterance draws from its own derived stream, so --threads cannot
  // change any output byte.
  std::vector<MixPlan> plans(n);
  std::vector<std::vector<float>> mixed(n);
  parallel_for(n, g.threads, [&](std::size_t i) {
    const UtteranceRecord& rec = m.records[i];
    std::vector<MixCandidate> peers;
    peers.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) peers.push_back(MixCandidate{m.records[j].id, clean[j]});
    }
    Rng rng(derive_seed(g.seed, rec.id));
    AugmentedUtterance aug =
        augment_utterance(rec.id, clean[i], peers, noise_pool, a.cfg, rng,
                          /*allow_utterance_mixing=*/n > 1);
    plans[i] = std::move(aug.plan);
    mixed[i] = std::move(aug.samples);
  });

  std::size_t augmented = 0;
  std::ofstream plans_out(std::filesystem::path(a.output) / "plans.jsonl");
  if (!plans_out) {
    throw Error("cannot write plans.jsonl under " + a.output);
  }
  Manifest out_manifest = m;
  for (std::size_t i = 0; i < n; ++i) {
    const UtteranceRecord& rec = m.records[i];
    // float32 output: mixed sums may leave [-1, 1] and are never clipped.
    write_wav_float32(std::filesystem::path(a.output) / (rec.id + ".wav"),
                      mixed[i], rec.sample_rate);
    out_manifest.records[i].path = rec.id + ".wav";
    json j = mix_plan_to_json(plans[i]);
    j["id"] = rec.id;
    plans_out << j.dump() << '\n';
    if (plans[i].augmented) ++augmented;
  }
  // The augmented set is itself a corpus; give it a manifest so every other
  // subcommand can consume it directly.
  save_manifest(out_manifest,
                std::filesystem::path(a.output) / "augmented.tsv");
  std::cout << json{{"utterances", n},
                    {"augmented", augmented},
                    {"noise_decodes", noise.decode_count()},
                    {"output", a.output}}
                   .dump(2)
            << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// labels subcommands

struct LabelsTrainArgs {
  std::string manifest;
  std::string output;
  std::size_t clusters = 100;
  int shift = 20;
  std::size_t max_iterations = 300;
  CLI::Option* clusters_opt = nullptr;
  CLI::Option* shift_opt = nullptr;
  CLI::Option* iters_opt = nullptr;
};

int run_labels_train(const GlobalOptions& g, LabelsTrainArgs& a) {
  apply_config(g, a.clusters_opt, "clusters", a.clusters);
  apply_config(g, a.shift_opt, "shift", a.shift);
  apply_config(g, a.iters_opt, "max-iterations", a.max_iterations);
  const Manifest m = load_manifest(a.manifest);
  if (m.records.empty()) {
    throw Error("labels train-km: manifest has no records");
  }
  const WaveformLoader loader =
      make_wav_loader(std::filesystem::path(a.manifest).parent_path());

  const std::size_t n = m.records.size();
  std::vector<FrameFeatureSequence> features(n);
  parallel_for(n, g.threads, [&](std::size_t i) {
    const std::vector<float> samples = loader(m.records[i]);
    features[i] =
        extract_features(samples, m.records[i].sample_rate, a.shift,
                         m.records[i].id);
  });
  std::vector<double> pooled;
  for (const auto& f : features) {
    pooled.insert(pooled.end(), f.data.begin(), f.data.end());
  }
  if (pooled.empty()) {
    throw Error("labels train-km: no frames extracted (are all clips shorter "
                "than one frame shift?)");
  }
  KmeansOptions opts;
  opts.max_iterations = a.max_iterations;
  KmeansResult result = train_kmeans(pooled, features.front().dim, a.clusters,
                                     g.seed, opts);
  result.codebook.trained_on =
      std::filesystem::path(a.manifest).filename().string();
  save_codebook(result.codebook, a.output);
  std::cout << json{{"clusters", a.clusters},
                    {"dim", result.codebook.dim},
                    {"frames", pooled.size() / result.codebook.dim},
                    {"iterations", result.iterations},
                    {"converged", result.converged},
                    {"final_inertia", result.inertia_per_iteration.back()},
                    {"output", a.output}}
                   .dump(2)
            << '\n';
  return 0;
}

struct LabelsAssignArgs {
  std::string manifest;
  std::string codebook;
  std::string output;
  int shift = 20;
  CLI::Option* shift_opt = nullptr;
};

int run_labels_assign(const GlobalOptions& g, LabelsAssignArgs& a) {
  apply_config(g, a.shift_opt, "shift", a.shift);
  const Manifest m = load_manifest(a.manifest);
  const Codebook cb = load_codebook(a.codebook);
  const WaveformLoader loader =
      make_wav_loader(std::filesystem::path(a.manifest).parent_path());
  const std::size_t n = m.records.size();
  std::vector<FrameLabelSequence> sequences(n);
  parallel_for(n, g.threads, [&](std::size_t i) {
    const std::vector<float> samples = loader(m.records[i]);
    sequences[i] = assign_labels(
        extract_features(samples, m.records[i].sample_rate, a.shift,
                         m.records[i].id),
        cb);
  });
  save_labels_jsonl(sequences, a.output);
  std::size_t total = 0;
  for (const auto& s : sequences) total += s.labels.size();
  std::cout << json{{"utterances", n},
                    {"frames", total},
                    {"frame_shift_ms", a.shift},
                    {"output", a.output}}
                   .dump(2)
            << '\n';
  return 0;
}

struct LabelsDownsampleArgs {
  std::string input;
  std::string output;
  int factor = 2;
};

int run_labels_downsample(const GlobalOptions&, const LabelsDownsampleArgs& a) {
  const std::vector<FrameLabelSequence> fine = load_labels_jsonl(a.input);
  std::vector<FrameLabelSequence> coarse;
  coarse.reserve(fine.size());
  for (const auto& seq : fine) {
    coarse.push_back(downsample_labels(seq, a.factor));
  }
  save_labels_jsonl(coarse, a.output);
  std::cout << json{{"utterances", fine.size()},
                    {"factor", a.factor},
                    {"output", a.output}}
                   .dump(2)
            << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// training commands

struct TrainCommonArgs {
  std::string noise;
  std::string labels;
  std::string codebook;
  std::string output;
  std::vector<std::size_t> hidden = {32, 32};
  double peak_lr = 1e-3;
  std::size_t warmup = 100;
  double cap_seconds = 30.0;
  std::vector<int> shifts = {20, 40, 80};
  std::uint32_t mask_span = kDefaultMaskSpan;
  double mask_start_probability = kDefaultMaskStartProbability;
  double p_augment = 0.2;
  double p_utterance = 0.1;

  CLI::Option* hidden_opt = nullptr;
  CLI::Option* peak_lr_opt = nullptr;
  CLI::Option* warmup_opt = nullptr;
  CLI::Option* cap_opt = nullptr;
  CLI::Option* shifts_opt = nullptr;
  CLI::Option* span_opt = nullptr;
  CLI::Option* mask_prob_opt = nullptr;
  CLI::Option* p_augment_opt = nullptr;
  CLI::Option* p_utterance_opt = nullptr;
};

void add_train_common_options(CLI::App* cmd, TrainCommonArgs& a) {
  cmd->add_option("--noise", a.noise, "Noise manifest for mixing")->required();
  cmd->add_option("--labels", a.labels, "Label file (jsonl) for targets")
      ->required();
  cmd->add_option("--codebook", a.codebook,
                  "Codebook file; sets the number of prediction classes")
      ->required();
  cmd->add_option("--output", a.output, "Run directory")->required();
  a.hidden_opt = cmd->add_option("--hidden", a.hidden,
                                 "Hidden layer widths (e.g. --hidden 32 32)");
  a.peak_lr_opt = cmd->add_option("--peak-lr", a.peak_lr, "Peak learning rate");
  a.warmup_opt = cmd->add_option("--warmup", a.warmup, "Warmup steps");
  a.cap_opt = cmd->add_option("--cap-seconds", a.cap_seconds,
                              "Per-batch duration cap in seconds");
  a.shifts_opt = cmd->add_option(
      "--shifts", a.shifts, "Frame shifts (ms) fused into the model input");
  a.span_opt = cmd->add_option("--mask-span", a.mask_span, "Mask span length");
  a.mask_prob_opt = cmd->add_option("--mask-start-prob", a.mask_start_probability,
                                    "Per-frame mask start probability");
  a.p_augment_opt =
      cmd->add_option("--p-augment", a.p_augment, "Augmentation probability");
  a.p_utterance_opt = cmd->add_option("--p-utterance", a.p_utterance,
                                      "Peer-vs-noise probability");
}

void resolve_train_common(const GlobalOptions& g, TrainCommonArgs& a) {
  apply_config(g, a.hidden_opt, "hidden", a.hidden);
  apply_config(g, a.peak_lr_opt, "peak-lr", a.peak_lr);
  apply_config(g, a.warmup_opt, "warmup", a.warmup);
  apply_config(g, a.cap_opt, "cap-seconds", a.cap_seconds);
  apply_config(g, a.shifts_opt, "shifts", a.shifts);
  apply_config(g, a.span_opt, "mask-span", a.mask_span);
  apply_config(g, a.mask_prob_opt, "mask-start-prob", a.mask_start_probability);
  apply_config(g, a.p_augment_opt, "p-augment", a.p_augment);
  apply_config(g, a.p_utterance_opt, "p-utterance", a.p_utterance);
}

int run_training(const GlobalOptions& g, const TrainCommonArgs& a,
                 TrainingPlan plan, const WaveformLoader& loader) {
  const Codebook cb = load_codebook(a.codebook);

  PipelineConfig pipeline;
  pipeline.augment.p_augment = a.p_augment;
  pipeline.augment.p_utterance = a.p_utterance;
  pipeline.fuse_shifts_ms = a.shifts;
  pipeline.mask_span = a.mask_span;
  pipeline.mask_start_probability = a.mask_start_probability;
  pipeline.batch_cap_seconds = a.cap_seconds;
  pipeline.threads = g.threads;
  pipeline.validate();

  ToyModelConfig model_cfg;
  // The codebook dim is the per-resolution feature dim; the model sees every
  // requested resolution fused along the feature axis.
  model_cfg.input_dim = cb.dim * a.shifts.size();
  model_cfg.hidden_dims = a.hidden;
  model_cfg.num_classes = cb.k;
  model_cfg.peak_learning_rate = a.peak_lr;
  model_cfg.warmup_steps = a.warmup;
  model_cfg.seed = derive_seed(g.seed, "model");
  ToyModel model(model_cfg);

  NoiseCache noise(load_manifest(a.noise),
                   make_wav_loader(std::filesystem::path(a.noise).parent_path()));
  const auto label_store = label_store_from_file(a.labels);

  std::filesystem::create_directories(a.output);
  write_json_file(
      std::filesystem::path(a.output) / "effective_config.json",
      json{{"seed", g.seed},
           {"threads", g.threads},
           {"hidden", a.hidden},
           {"peak-lr", a.peak_lr},
           {"warmup", a.warmup},
           {"cap-seconds", a.cap_seconds},
           {"shifts", a.shifts},
           {"mask-span", a.mask_span},
           {"mask-start-prob", a.mask_start_probability},
           {"classes", cb.k},
           {"augment", augment_config_to_json(pipeline.augment)}});

  const TrainOutcome outcome = train_plan_with_model(
      model, plan, pipeline, noise, loader, label_store,
      derive_seed(g.seed, "train"));

  model.save(std::filesystem::path(a.output) / "model.bin");
  json stages = json::array();
  for (const auto& s : outcome.summaries) {
    stages.push_back({{"name", s.name},
                      {"steps", s.steps},
                      {"epochs_started", s.epochs_started},
                      {"mean_loss", s.mean_loss},
                      {"wall_seconds", s.wall_seconds}});
  }
  const json summary{{"stages", stages},
                     {"items_seen", outcome.items_seen},
                     {"items_augmented", outcome.items_augmented},
                     {"items_peer_mixed", outcome.items_peer_mixed},
                     {"items_noise_mixed", outcome.items_noise_mixed},
                     {"empty_mask_steps", outcome.empty_mask_steps},
                     {"model", "model.bin"}};
  write_json_file(std::filesystem::path(a.output) / "summaries.json", summary);
  std::cout << summary.dump(2) << '\n';
  return 0;
}

struct PretrainArgs {
  TrainCommonArgs common;
  std::string plan_path;
};

int run_pretrain(const GlobalOptions& g, PretrainArgs& a) {
  resolve_train_common(g, a.common);
  TrainingPlan plan = load_training_plan(a.plan_path);
  // Stage manifests come from the plan file; waveform paths inside each
  // manifest are relative to that manifest. Rewrite them so one loader can
  // serve every stage.
  const std::filesystem::path plan_dir =
      std::filesystem::path(a.plan_path).parent_path();
  for (auto& stage : plan.stages) {
    std::filesystem::path mp(stage.manifest_path);
    if (mp.is_relative()) mp = plan_dir / mp;
    const std::filesystem::path manifest_dir = mp.parent_path();
    for (auto& rec : stage.manifest.records) {
      std::filesystem::path rp(rec.path);
      if (rp.is_relative()) rec.path = (manifest_dir / rp).string();
    }
  }
  return run_training(g, a.common, std::move(plan), make_wav_loader({}));
}

struct ToyTrainArgs {
  TrainCommonArgs common;
  std::string manifest;
  std::size_t steps = 20;
  CLI::Option* steps_opt = nullptr;
};

int run_toy_train(const GlobalOptions& g, ToyTrainArgs& a) {
  resolve_train_common(g, a.common);
  apply_config(g, a.steps_opt, "steps", a.steps);
  TrainingPlan plan;
  StagePlan stage;
  stage.name = "train";
  stage.manifest_path = a.manifest;
  stage.manifest = load_manifest(a.manifest);
  stage.steps = a.steps;
  stage.init = StageInit::kScratch;
  plan.stages.push_back(std::move(stage));
  return run_training(
      g, a.common, std::move(plan),
      make_wav_loader(std::filesystem::path(a.manifest).parent_path()));
}

// ---------------------------------------------------------------------------
// score subcommands

struct ScoreCerArgs {
  std::string hypothesis;
  std::string reference;
};

int run_score_cer(const GlobalOptions&, const ScoreCerArgs& a) {
  const std::vector<std::string> hyp = read_lines(a.hypothesis);
  const std::vector<std::string> ref = read_lines(a.reference);
  if (hyp.size() != ref.size()) {
    throw Error("score cer: " + std::to_string(hyp.size()) +
                " hypothesis lines vs " + std::to_string(ref.size()) +
                " reference lines");
  }
  if (hyp.empty()) {
    throw Error("score cer: no line pairs");
  }
  json per_line = json::array();
  double sum = 0.0;
  for (std::size_t i = 0; i < hyp.size(); ++i) {
    double value = 0.0;
    try {
      value = cer(hyp[i], ref[i]);
    } catch (const Error& e) {
      throw Error("line " + std::to_string(i + 1) + ": " + e.what());
    }
    per_line.push_back(value);
    sum += value;
  }
  std::cout << json{{"pairs", hyp.size()},
                    {"mean_cer", sum / static_cast<double>(hyp.size())},
                    {"per_line", per_line}}
                   .dump(2)
            << '\n';
  return 0;
}

struct ScoreSuperbArgs {
  std::string results;
  std::string baseline;
};

int run_score_superb(const GlobalOptions&, const ScoreSuperbArgs& a) {
  std::ifstream in(a.results);
  if (!in) {
    throw Error("cannot open results: " + a.results);
  }
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("invalid results json: " + std::string(e.what()));
  }
  std::vector<TaskResult> results;
  try {
    for (const auto& cell : j.at("results")) {
      TaskResult r;
      r.model = cell.at("model").get<std::string>();
      r.task = cell.at("task").get<std::string>();
      const auto metric = cell.at("metric").get<std::string>();
      if (metric == "acc") {
        r.metric = Metric::kAccuracy;
      } else if (metric == "cer") {
        r.metric = Metric::kCer;
      } else {
        throw Error("unknown metric '" + metric + "' (expected acc or cer)");
      }
      r.value = cell.at("value").get<double>();
      results.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw Error("invalid results json: " + std::string(e.what()));
  }
  std::optional<std::map<std::string, double>> baselines;
  if (!a.baseline.empty()) {
    std::ifstream bin(a.baseline);
    if (!bin) {
      throw Error("cannot open baseline: " + a.baseline);
    }
    json bj;
    try {
      bin >> bj;
      baselines = bj.get<std::map<std::string, double>>();
    } catch (const json::exception& e) {
      throw Error("invalid baseline json: " + std::string(e.what()));
    }
  }
  const auto scores = superb_score(results, baselines);
  json out = json::object();
  for (const auto& [model, score] : scores) out[model] = score;
  std::cout << json{{"scores", out}}.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// demo

struct DemoArgs {
  std::string output;
  DemoOptions options;
  CLI::Option* s1_opt = nullptr;
  CLI::Option* s2_opt = nullptr;
  CLI::Option* k_opt = nullptr;
};

int run_demo_cmd(const GlobalOptions& g, DemoArgs& a) {
  apply_config(g, a.s1_opt, "stage1-steps", a.options.stage1_steps);
  apply_config(g, a.s2_opt, "stage2-steps", a.options.stage2_steps);
  apply_config(g, a.k_opt, "clusters", a.options.kmeans_clusters);
  a.options.seed = g.seed;
  a.options.threads = g.threads;
  std::filesystem::create_directories(a.output);
  write_json_file(std::filesystem::path(a.output) / "effective_config.json",
                  json{{"seed", g.seed},
                       {"threads", g.threads},
                       {"stage1-steps", a.options.stage1_steps},
                       {"stage2-steps", a.options.stage2_steps},
                       {"clusters", a.options.kmeans_clusters}});
  const json report = run_demo(a.output, a.options);
  std::cout << report.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "sslforge: data machinery for multilingual masked-prediction "
      "pre-training (curation, mixing augmentation, pseudo-labels, batch "
      "scheduling, desk-scale training, score aggregation)"};
  app.require_subcommand(1);
  app.fallthrough(false);

  GlobalOptions g;
  g.seed_opt = app.add_option(
      "--seed", g.seed,
      "Random seed (falls back to config, then SSLFORGE_SEED, then 0)");
  g.threads_opt =
      app.add_option("--threads", g.threads,
                     "Worker threads; results are identical for any value");
  app.add_option("--config", g.config_path,
                 "JSON config file; flags beat config, config beats defaults");

  // manifest
  auto* manifest_cmd = app.add_subcommand("manifest", "Corpus manifest tools");
  manifest_cmd->require_subcommand(1);
  ManifestStatsArgs stats_args;
  auto* stats_cmd = manifest_cmd->add_subcommand(
      "stats", "Hours by language/corpus, top-k languages");
  stats_cmd->add_option("--manifest", stats_args.manifest, "Manifest file")
      ->required();
  stats_args.top_opt =
      stats_cmd->add_option("--top", stats_args.top_k, "Top-k language count");

  ManifestFilterArgs filter_args;
  auto* filter_cmd = manifest_cmd->add_subcommand(
      "filter", "Keep utterances at most --max-seconds long");
  filter_cmd->add_option("--manifest", filter_args.manifest, "Manifest file")
      ->required();
  filter_cmd->add_option("--output", filter_args.output, "Output manifest")
      ->required();
  filter_args.max_opt = filter_cmd->add_option(
      "--max-seconds", filter_args.max_seconds, "Duration cap (inclusive)");

  ManifestSubsetArgs subset_args;
  auto* subset_cmd =
      manifest_cmd->add_subcommand("subset", "Keep selected corpora only");
  subset_cmd->add_option("--manifest", subset_args.manifest, "Manifest file")
      ->required();
  subset_cmd->add_option("--output", subset_args.output, "Output manifest")
      ->required();
  subset_cmd
      ->add_option("--corpora", subset_args.corpora,
                   "Comma-separated corpus tags, e.g. FLEURS,BABEL")
      ->required();

  // augment
  AugmentArgs augment_args;
  auto* augment_cmd = app.add_subcommand(
      "augment", "Mix utterances with noise or batch peers, reproducibly");
  augment_cmd->add_option("--manifest", augment_args.manifest, "Manifest file")
      ->required();
  augment_cmd->add_option("--noise", augment_args.noise, "Noise manifest")
      ->required();
  augment_cmd->add_option("--output", augment_args.output, "Output directory")
      ->required();
  augment_args.p_augment_opt = augment_cmd->add_option(
      "--p-augment", augment_args.cfg.p_augment, "Augmentation probability");
  augment_args.p_utterance_opt =
      augment_cmd->add_option("--p-utterance", augment_args.cfg.p_utterance,
                              "Peer-vs-noise probability");
  augment_args.retries_opt = augment_cmd->add_option(
      "--retries", augment_args.cfg.silent_source_retries,
      "Silent-source redraw budget");
  augment_args.full_energies_opt = augment_cmd->add_flag(
      "--full-energies", augment_args.full_energies,
      "Use full-clip energies instead of mixed-window energies");
  augment_args.literal_opt = augment_cmd->add_flag(
      "--literal-scale", augment_args.cfg.literal_scale,
      "Treat the drawn ratio as linear instead of dB (study mode)");
  augment_args.snr_utt_lo_opt =
      augment_cmd->add_option("--snr-utterance-lo",
                              augment_args.cfg.snr_db_utterance.lo,
                              "Peer-mix ratio lower bound (dB)");
  augment_args.snr_utt_hi_opt =
      augment_cmd->add_option("--snr-utterance-hi",
                              augment_args.cfg.snr_db_utterance.hi,
                              "Peer-mix ratio upper bound (dB)");
  augment_args.snr_noise_lo_opt = augment_cmd->add_option(
      "--snr-noise-lo", augment_args.cfg.snr_db_noise.lo,
      "Noise-mix ratio lower bound (dB)");
  augment_args.snr_noise_hi_opt = augment_cmd->add_option(
      "--snr-noise-hi", augment_args.cfg.snr_db_noise.hi,
      "Noise-mix ratio upper bound (dB)");

  // labels
  auto* labels_cmd = app.add_subcommand("labels", "Pseudo-label tools");
  labels_cmd->require_subcommand(1);
  LabelsTrainArgs ltrain_args;
  auto* ltrain_cmd = labels_cmd->add_subcommand(
      "train-km", "Cluster pooled features into a codebook");
  ltrain_cmd->add_option("--manifest", ltrain_args.manifest, "Manifest file")
      ->required();
  ltrain_cmd->add_option("--output", ltrain_args.output, "Codebook file")
      ->required();
  ltrain_args.clusters_opt = ltrain_cmd->add_option(
      "--clusters", ltrain_args.clusters, "Number of clusters");
  ltrain_args.shift_opt = ltrain_cmd->add_option(
      "--shift", ltrain_args.shift, "Frame shift in ms (20, 40, or 80)");
  ltrain_args.iters_opt = ltrain_cmd->add_option(
      "--max-iterations", ltrain_args.max_iterations, "Lloyd iteration cap");

  LabelsAssignArgs lassign_args;
  auto* lassign_cmd = labels_cmd->add_subcommand(
      "assign", "Quantize utterances against a codebook");
  lassign_cmd->add_option("--manifest", lassign_args.manifest, "Manifest file")
      ->required();
  lassign_cmd->add_option("--codebook", lassign_args.codebook, "Codebook file")
      ->required();
  lassign_cmd->add_option("--output", lassign_args.output, "Label jsonl file")
      ->required();
  lassign_args.shift_opt = lassign_cmd->add_option(
      "--shift", lassign_args.shift, "Frame shift in ms (20, 40, or 80)");

  LabelsDownsampleArgs ldown_args;
  auto* ldown_cmd = labels_cmd->add_subcommand(
      "downsample", "Coarsen labels by majority vote");
  ldown_cmd->add_option("--labels", ldown_args.input, "Input label jsonl")
      ->required();
  ldown_cmd->add_option("--output", ldown_args.output, "Output label jsonl")
      ->required();
  ldown_cmd->add_option("--factor", ldown_args.factor, "2 or 4")->required();

  // pretrain / toy-train
  PretrainArgs pretrain_args;
  auto* pretrain_cmd = app.add_subcommand(
      "pretrain", "Run a multi-stage training plan on packed batches");
  pretrain_cmd->add_option("--plan", pretrain_args.plan_path, "Plan json file")
      ->required();
  add_train_common_options(pretrain_cmd, pretrain_args.common);

  ToyTrainArgs toy_args;
  auto* toy_cmd = app.add_subcommand(
      "toy-train", "Single-stage training on one manifest");
  toy_cmd->add_option("--manifest", toy_args.manifest, "Manifest file")
      ->required();
  toy_args.steps_opt =
      toy_cmd->add_option("--steps", toy_args.steps, "Training steps");
  add_train_common_options(toy_cmd, toy_args.common);

  // score
  auto* score_cmd = app.add_subcommand("score", "Evaluation aggregation");
  score_cmd->require_subcommand(1);
  ScoreCerArgs cer_args;
  auto* cer_cmd = score_cmd->add_subcommand(
      "cer", "Character error rate over paired text files");
  cer_cmd->add_option("--hypothesis", cer_args.hypothesis, "Hypothesis file")
      ->required();
  cer_cmd->add_option("--reference", cer_args.reference, "Reference file")
      ->required();

  ScoreSuperbArgs superb_args;
  auto* superb_cmd = score_cmd->add_subcommand(
      "superb", "Benchmark-style aggregate over a results matrix");
  superb_cmd->add_option("--results", superb_args.results, "Results json file")
      ->required();
  superb_cmd->add_option("--baseline", superb_args.baseline,
                         "Optional per-task baseline json file");

  // demo
  DemoArgs demo_args;
  auto* demo_cmd = app.add_subcommand(
      "demo", "Synthetic end-to-end walkthrough with a determinism check");
  demo_cmd->add_option("--output", demo_args.output, "Output directory")
      ->required();
  demo_args.s1_opt = demo_cmd->add_option(
      "--stage1-steps", demo_args.options.stage1_steps, "Stage 1 steps");
  demo_args.s2_opt = demo_cmd->add_option(
      "--stage2-steps", demo_args.options.stage2_steps, "Stage 2 steps");
  demo_args.k_opt = demo_cmd->add_option(
      "--clusters", demo_args.options.kmeans_clusters, "Codebook size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << nlohmann::json{{"error", e.what()},
                                {"kind", "usage"}}
                     .dump()
              << '\n';
    return 1;
  }

  try {
    resolve_globals(g);
    if (stats_cmd->parsed()) return run_manifest_stats(g, stats_args);
    if (filter_cmd->parsed()) return run_manifest_filter(g, filter_args);
    if (subset_cmd->parsed()) return run_manifest_subset(g, subset_args);
    if (augment_cmd->parsed()) return run_augment(g, augment_args);
    if (ltrain_cmd->parsed()) return run_labels_train(g, ltrain_args);
    if (lassign_cmd->parsed()) return run_labels_assign(g, lassign_args);
    if (ldown_cmd->parsed()) return run_labels_downsample(g, ldown_args);
    if (pretrain_cmd->parsed()) return run_pretrain(g, pretrain_args);
    if (toy_cmd->parsed()) return run_toy_train(g, toy_args);
    if (cer_cmd->parsed()) return run_score_cer(g, cer_args);
    if (superb_cmd->parsed()) return run_score_superb(g, superb_args);
    if (demo_cmd->parsed()) return run_demo_cmd(g, demo_args);
    throw Error("no subcommand selected");
  } catch (const std::exception& e) {
    std::string command;
    for (int i = 1; i < argc; ++i) {
      if (!command.empty()) command += ' ';
      command += argv[i];
    }
    std::cerr << nlohmann::json{{"error", e.what()}, {"command", command}}
                     .dump()
              << '\n';
    return 1;
  }
}
