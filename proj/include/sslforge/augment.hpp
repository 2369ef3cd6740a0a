#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sslforge/rng.hpp"

namespace sslforge {

/// Half-open is wrong for these: both ends are meaningful targets, so ranges
/// are treated as closed for validation and sampled as uniform(lo, hi).
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Knobs for on-the-fly mixing. Defaults reproduce the standard recipe:
/// an utterance is augmented with probability 0.2, and an augmented
/// utterance draws another in-batch utterance (rather than a noise clip)
/// with probability 0.1.
struct AugmentConfig {
  double p_augment = 0.2;          // chance an utterance gets a mixed-in source
  double p_utterance = 0.1;        // chance the source is a batch peer
  Interval snr_db_utterance{-5.0, 20.0};  // target ratio when mixing speech
  Interval snr_db_noise{-5.0, 5.0};       // target ratio when mixing noise
  int silent_source_retries = 8;   // redraws allowed for zero-energy sources

  /// When true (default), the energies entering the mixing ratio are taken
  /// over the two windows actually being mixed. When false they are taken
  /// over the full utterance and full source, reproducing setups that cache
  /// one energy per clip.
  bool window_energies = true;

  /// When true, the energy ratio parameter is consumed as a plain linear
  /// ratio, s = sqrt(E_u / (e * E_n)), instead of being interpreted in dB.
  /// Provided for side-by-side study of the two readings; requires strictly
  /// positive ratio intervals.
  bool literal_scale = false;

  void validate() const;  // throws Error on out-of-range settings
};

enum class MixSource { kUtterance, kNoise };

/// Everything needed to reproduce one augmentation decision. Serialized next
/// to augmented audio so a mix can be replayed or audited byte-for-byte.
struct MixPlan {
  bool augmented = false;
  MixSource source_kind = MixSource::kNoise;
  std::string source_id;       // empty when not augmented
  double snr_db = 0.0;         // drawn energy-ratio target (dB, or linear in literal mode)
  std::size_t length = 0;      // l: window length in samples
  std::size_t start = 0;       // t: window offset in the utterance
  std::size_t source_start = 0;  // t_n: window offset in the source
  double scale = 0.0;          // s: gain applied to the source window

  bool operator==(const MixPlan&) const = default;
};

nlohmann::json mix_plan_to_json(const MixPlan& plan);
MixPlan mix_plan_from_json(const nlohmann::json& j);

/// Sum of squared samples. Requires a non-empty span.
double utterance_energy(std::span<const float> x);

/// Source gain for a target energy ratio of e_db decibels:
///   s = sqrt(E_u / (10^(e_db/10) * E_n)).
/// After scaling, 10*log10(E_u / (s^2 * E_n)) == e_db. Requires E_n > 0 and
/// E_u >= 0.
double mixing_scale(double energy_utterance, double energy_source, double e_db);

/// Literal linear-ratio form, s = sqrt(E_u / (e * E_n)). The ratio e must be
/// strictly positive; the sampled ranges include negative values only under
/// the dB interpretation.
double mixing_scale_literal(double energy_utterance, double energy_source,
                            double ratio);

/// A mixing source candidate: a batch peer or a decoded noise clip.
struct MixCandidate {
  std::string_view id;
  std::span<const float> samples;
};

/// Draws one augmentation decision for utterance `u`. Consumes draws from
/// `rng` in a fixed, documented order so plans are reproducible:
///   1. v ~ U[0,1): augment at all? (v < p_augment)
///   2. w ~ U[0,1): peer vs noise (only when allow_utterance_mixing; the
///      draw is skipped entirely otherwise, e.g. for single-item batches).
///      A peer is used when w < p_utterance and `peers` is non-empty.
///   3. source index ~ DiscreteU over the chosen pool
///   4. target ratio ~ U(lo, hi) for the chosen source kind
///   5. l ~ DiscreteU(0, floor(len(u)/2)), t ~ DiscreteU(0, len(u) - l)
///   6. t_n ~ DiscreteU(0, eff - l) with eff = max(len(source), l); sources
///      shorter than l repeat cyclically.
/// A zero-energy source window triggers a redraw of steps 3 and 6, at most
/// silent_source_retries times; if every attempt is silent the plan falls
/// back to augmented = false.
/// Throws Error if a noise source is drawn while `noise_pool` is empty.
MixPlan sample_plan(std::string_view utterance_id, std::span<const float> u,
                    std::span<const MixCandidate> peers,
                    std::span<const MixCandidate> noise_pool,
                    const AugmentConfig& cfg, Rng& rng,
                    bool allow_utterance_mixing = true);

/// Applies a plan: out = u, then out[t + j] += s * source[(t_n + j) mod len]
/// for j in [0, l). No clipping or renormalization is performed; callers
/// store results as float, not integer PCM. Throws Error if the plan's
/// windows do not fit u/source.
std::vector<float> apply_plan(std::span<const float> u,
                              std::span<const float> source, const MixPlan& plan);

struct AugmentedUtterance {
  std::vector<float> samples;
  MixPlan plan;
};

/// sample_plan + apply_plan, resolving the planned source id against the
/// candidate pools.
AugmentedUtterance augment_utterance(std::string_view utterance_id,
                                     std::span<const float> u,
                                     std::span<const MixCandidate> peers,
                                     std::span<const MixCandidate> noise_pool,
                                     const AugmentConfig& cfg, Rng& rng,
                                     bool allow_utterance_mixing = true);

}  // namespace sslforge
