#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sslforge/manifest.hpp"

namespace sslforge {

/// Recipe for one synthetic clip. Tonal clips (base_freq_hz > 0) are harmonic
/// stacks with mild vibrato plus a low noise floor, which gives the feature
/// extractor realistic spectral structure to cluster; base_freq_hz == 0
/// produces uniform noise (used for the mixing-noise corpus).
struct SynthSpec {
  std::string id;
  Corpus corpus = Corpus::kOther;
  std::string language = "und";
  double seconds = 1.0;
  double base_freq_hz = 220.0;
  double amplitude = 0.25;
  std::uint64_t seed = 0;
};

std::vector<float> synth_waveform(const SynthSpec& spec,
                                  std::uint32_t sample_rate);

/// Synthesizes every spec to `dir/<id>.wav` (16-bit PCM) and returns the
/// matching manifest, with paths relative to `dir`.
Manifest write_synthetic_corpus(const std::filesystem::path& dir,
                                const std::vector<SynthSpec>& specs,
                                std::uint32_t sample_rate);

/// The demo's speech-like corpus: a handful of "languages" with deliberately
/// imbalanced hours spread over several corpora (including a FLEURS/BABEL
/// low-resource slice for the later curriculum stage), plus one over-long
/// clip that the duration filter should drop.
std::vector<SynthSpec> demo_speech_specs(std::uint64_t seed);

/// Noise clips for the mixing pool, including one all-zero (silent) clip to
/// exercise the silent-source retry path.
std::vector<SynthSpec> demo_noise_specs(std::uint64_t seed);

}  // namespace sslforge
