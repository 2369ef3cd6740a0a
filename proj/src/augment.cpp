#include "sslforge/augment.hpp"

#include <algorithm>
#include <cmath>

#include "sslforge/kernels.hpp"
#include "sslforge/util.hpp"

namespace sslforge {
namespace {

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw Error(std::string(name) + " must be in [0, 1], got " +
                std::to_string(p));
  }
}

void check_interval(const Interval& r, const char* name) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.lo > r.hi) {
    throw Error(std::string(name) + " must be a finite interval with lo <= hi");
  }
}

/// Energy of the length-l window starting at t_n, with cyclic wrap for
/// sources shorter than the window. Empty windows/sources have zero energy.
double window_energy(std::span<const float> src, std::size_t t_n, std::size_t l) {
  if (l == 0 || src.empty()) return 0.0;
  if (t_n + l <= src.size()) {
    return kernels::sum_squares(src.subspan(t_n, l));
  }
  // Cyclic case: head to the end of the source, then whole copies, then a tail.
  double acc = kernels::sum_squares(src.subspan(t_n));
  std::size_t remaining = l - (src.size() - t_n);
  const double full = kernels::sum_squares(src);
  while (remaining >= src.size()) {
    acc += full;
    remaining -= src.size();
  }
  if (remaining > 0) acc += kernels::sum_squares(src.first(remaining));
  return acc;
}

}  // namespace

void AugmentConfig::validate() const {
  check_probability(p_augment, "p_augment");
  check_probability(p_utterance, "p_utterance");
  check_interval(snr_db_utterance, "snr_db_utterance");
  check_interval(snr_db_noise, "snr_db_noise");
  if (silent_source_retries < 0) {
    throw Error("silent_source_retries must be >= 0");
  }
  if (literal_scale && (snr_db_utterance.lo <= 0.0 || snr_db_noise.lo <= 0.0)) {
    throw Error(
        "literal ratio mode treats the drawn value as a linear energy ratio, "
        "which must be strictly positive; configure positive intervals");
  }
}

double utterance_energy(std::span<const float> x) {
  if (x.empty()) {
    throw Error("utterance_energy: empty waveform");
  }
  return kernels::sum_squares(x);
}

double mixing_scale(double energy_utterance, double energy_source, double e_db) {
  if (!(energy_source > 0.0)) {
    throw Error("mixing_scale: source energy must be positive");
  }
  if (energy_utterance < 0.0) {
    throw Error("mixing_scale: utterance energy must be non-negative");
  }
  return std::sqrt(energy_utterance /
                   (std::pow(10.0, e_db / 10.0) * energy_source));
}

double mixing_scale_literal(double energy_utterance, double energy_source,
                            double ratio) {
  if (!(energy_source > 0.0)) {
    throw Error("mixing_scale_literal: source energy must be positive");
  }
  if (energy_utterance < 0.0) {
    throw Error("mixing_scale_literal: utterance energy must be non-negative");
  }
  if (!(ratio > 0.0)) {
    throw Error(
        "mixing_scale_literal: energy ratio must be strictly positive (a "
        "non-positive ratio has no square root; use the dB interpretation "
        "for signed targets)");
  }
  return std::sqrt(energy_utterance / (ratio * energy_source));
}

nlohmann::json mix_plan_to_json(const MixPlan& plan) {
  return nlohmann::json{
      {"augmented", plan.augmented},
      {"source_kind",
       plan.source_kind == MixSource::kUtterance ? "utterance" : "noise"},
      {"source_id", plan.source_id},
      {"snr_db", plan.snr_db},
      {"length", plan.length},
      {"start", plan.start},
      {"source_start", plan.source_start},
      {"scale", plan.scale},
  };
}

MixPlan mix_plan_from_json(const nlohmann::json& j) {
  try {
    MixPlan plan;
    plan.augmented = j.at("augmented").get<bool>();
    const auto kind = j.at("source_kind").get<std::string>();
    if (kind == "utterance") {
      plan.source_kind = MixSource::kUtterance;
    } else if (kind == "noise") {
      plan.source_kind = MixSource::kNoise;
    } else {
      throw Error("invalid source_kind '" + kind + "'");
    }
    plan.source_id = j.at("source_id").get<std::string>();
    plan.snr_db = j.at("snr_db").get<double>();
    plan.length = j.at("length").get<std::size_t>();
    plan.start = j.at("start").get<std::size_t>();
    plan.source_start = j.at("source_start").get<std::size_t>();
    plan.scale = j.at("scale").get<double>();
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid mix plan json: ") + e.what());
  }
}

MixPlan sample_plan(std::string_view utterance_id, std::span<const float> u,
                    std::span<const MixCandidate> peers,
                    std::span<const MixCandidate> noise_pool,
                    const AugmentConfig& cfg, Rng& rng,
                    bool allow_utterance_mixing) {
  cfg.validate();
  if (u.empty()) {
    throw Error("cannot augment empty waveform '" + std::string(utterance_id) +
                "'");
  }

  MixPlan plan;
  const double v = rng.uniform();
  if (!(v < cfg.p_augment)) {
    return plan;  // not augmented
  }

  // Peer-vs-noise decision. Single-item batches pass
  // allow_utterance_mixing = false, in which case the w draw is skipped
  // entirely rather than drawn and ignored.
  bool use_peer = false;
  if (allow_utterance_mixing) {
    const double w = rng.uniform();
    use_peer = (w < cfg.p_utterance) && !peers.empty();
  }
  const std::span<const MixCandidate> pool = use_peer ? peers : noise_pool;
  if (pool.empty()) {
    throw Error("augmentation of '" + std::string(utterance_id) +
                "' drew a noise source but the noise pool is empty");
  }
  const Interval& range = use_peer ? cfg.snr_db_utterance : cfg.snr_db_noise;

  std::size_t idx = rng.below(pool.size());
  const double target = rng.uniform(range.lo, range.hi);

  const auto len_u = static_cast<std::int64_t>(u.size());
  const auto l =
      static_cast<std::size_t>(rng.uniform_int(0, len_u / 2));
  const auto t = static_cast<std::size_t>(
      rng.uniform_int(0, len_u - static_cast<std::int64_t>(l)));
  auto draw_source_start = [&](std::size_t source_len) {
    const std::size_t eff = std::max(source_len, l);
    return static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(eff - l)));
  };
  std::size_t t_n = draw_source_start(pool[idx].samples.size());

  const bool windowed = cfg.window_energies;
  double scale = 0.0;
  if (l == 0 && windowed) {
    // Zero-length mix window: nothing is added, the gain is recorded as 0.
    scale = 0.0;
  } else {
    auto source_energy = [&](std::size_t i, std::size_t start) {
      return windowed ? window_energy(pool[i].samples, start, l)
                      : (pool[i].samples.empty()
                             ? 0.0
                             : kernels::sum_squares(pool[i].samples));
    };
    double e_n = source_energy(idx, t_n);
    int retries = 0;
    while (e_n <= 0.0) {
      if (retries >= cfg.silent_source_retries) {
        return MixPlan{};  // every attempt silent: fall back to no augmentation
      }
      ++retries;
      idx = rng.below(pool.size());
      t_n = draw_source_start(pool[idx].samples.size());
      e_n = source_energy(idx, t_n);
    }
    const double e_u = windowed ? window_energy(u, t, l)
                                : kernels::sum_squares(u);
    scale = cfg.literal_scale ? mixing_scale_literal(e_u, e_n, target)
                              : mixing_scale(e_u, e_n, target);
  }

  plan.augmented = true;
  plan.source_kind = use_peer ? MixSource::kUtterance : MixSource::kNoise;
  plan.source_id = std::string(pool[idx].id);
  plan.snr_db = target;
  plan.length = l;
  plan.start = t;
  plan.source_start = t_n;
  plan.scale = scale;
  return plan;
}

std::vector<float> apply_plan(std::span<const float> u,
                              std::span<const float> source,
                              const MixPlan& plan) {
  std::vector<float> out(u.begin(), u.end());
  if (!plan.augmented || plan.length == 0) {
    return out;
  }
  if (plan.start + plan.length > out.size()) {
    throw Error("apply_plan: mix window exceeds the utterance");
  }
  if (source.empty()) {
    throw Error("apply_plan: mix source is empty");
  }
  const std::size_t eff = std::max(source.size(), plan.length);
  if (plan.source_start + plan.length > eff) {
    throw Error("apply_plan: source window out of range");
  }
  const std::span<float> dst(out.data() + plan.start, plan.length);
  const auto gain = static_cast<float>(plan.scale);
  if (plan.source_start + plan.length <= source.size()) {
    kernels::scaled_add(dst, source.subspan(plan.source_start, plan.length),
                        gain);
  } else {
    // Short source: materialize the cyclic window, then mix.
    std::vector<float> window(plan.length);
    for (std::size_t j = 0; j < plan.length; ++j) {
      window[j] = source[(plan.source_start + j) % source.size()];
    }
    kernels::scaled_add(dst, window, gain);
  }
  return out;
}

AugmentedUtterance augment_utterance(std::string_view utterance_id,
                                     std::span<const float> u,
                                     std::span<const MixCandidate> peers,
                                     std::span<const MixCandidate> noise_pool,
                                     const AugmentConfig& cfg, Rng& rng,
                                     bool allow_utterance_mixing) {
  MixPlan plan = sample_plan(utterance_id, u, peers, noise_pool, cfg, rng,
                             allow_utterance_mixing);
  if (!plan.augmented) {
    return {std::vector<float>(u.begin(), u.end()), std::move(plan)};
  }
  const std::span<const MixCandidate> pool =
      plan.source_kind == MixSource::kUtterance ? peers : noise_pool;
  const MixCandidate* chosen = nullptr;
  for (const auto& cand : pool) {
    if (cand.id == plan.source_id) {
      chosen = &cand;
      break;
    }
  }
  if (chosen == nullptr) {
    throw Error("augment_utterance: planned source '" + plan.source_id +
                "' not found in its pool");
  }
  return {apply_plan(u, chosen->samples, plan), std::move(plan)};
}

}  // namespace sslforge
