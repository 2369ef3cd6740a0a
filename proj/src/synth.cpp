#include "sslforge/synth.hpp"

#include <cmath>
#include <numbers>

#include "sslforge/rng.hpp"
#include "sslforge/util.hpp"
#include "sslforge/wav.hpp"

namespace sslforge {

std::vector<float> synth_waveform(const SynthSpec& spec,
                                  std::uint32_t sample_rate) {
  const auto n = static_cast<std::size_t>(spec.seconds * sample_rate);
  std::vector<float> samples(n, 0.0f);
  if (spec.amplitude == 0.0) {
    return samples;  // deliberate silence
  }
  Rng rng(derive_seed(spec.seed, spec.id));
  if (spec.base_freq_hz <= 0.0) {
    for (auto& s : samples) {
      s = static_cast<float>(rng.uniform(-spec.amplitude, spec.amplitude));
    }
    return samples;
  }
  // Harmonic stack with vibrato and a faint noise floor. The per-clip phase
  // and vibrato rate come from the clip's seed, so clips are distinct but
  // reproducible.
  const double phase0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double vibrato_hz = rng.uniform(3.0, 7.0);
  const double harmonics[3] = {1.0, 0.5, 0.25};
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double vib = 1.0 + 0.01 * std::sin(2.0 * std::numbers::pi * vibrato_hz * t);
    double v = 0.0;
    for (int h = 0; h < 3; ++h) {
      v += harmonics[h] * std::sin(2.0 * std::numbers::pi * spec.base_freq_hz *
                                       (h + 1) * vib * t +
                                   phase0 * (h + 1));
    }
    v = spec.amplitude * v / 1.75;
    v += rng.uniform(-0.005, 0.005);
    samples[i] = static_cast<float>(v);
  }
  return samples;
}

Manifest write_synthetic_corpus(const std::filesystem::path& dir,
                                const std::vector<SynthSpec>& specs,
                                std::uint32_t sample_rate) {
  std::filesystem::create_directories(dir);
  Manifest m;
  for (const auto& spec : specs) {
    const std::vector<float> samples = synth_waveform(spec, sample_rate);
    const std::string filename = spec.id + ".wav";
    write_wav_pcm16(dir / filename, samples, sample_rate);
    UtteranceRecord rec;
    rec.id = spec.id;
    rec.path = filename;
    rec.corpus = spec.corpus;
    rec.language = spec.language;
    rec.duration =
        static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
    rec.sample_rate = sample_rate;
    m.records.push_back(std::move(rec));
  }
  validate_manifest(m);
  return m;
}

std::vector<SynthSpec> demo_speech_specs(std::uint64_t seed) {
  // Imbalanced on purpose: "eng" dominates, the FLEURS/BABEL slice holds the
  // low-resource languages the later stage re-balances onto.
  struct Row {
    const char* lang;
    Corpus corpus;
    double freq;
    int clips;
    double seconds;
  };
  const Row rows[] = {
      {"eng", Corpus::kMls, 160.0, 6, 2.2},
      {"eng", Corpus::kCommonVoice, 175.0, 4, 1.8},
      {"deu", Corpus::kVoxPopuli, 220.0, 3, 2.0},
      {"fra", Corpus::kCommonVoice, 260.0, 3, 1.6},
      {"swa", Corpus::kFleurs, 330.0, 3, 1.4},
      {"lug", Corpus::kFleurs, 392.0, 2, 1.3},
      {"ben", Corpus::kBabel, 440.0, 3, 1.5},
      {"sin", Corpus::kBabel, 494.0, 2, 1.2},
  };
  std::vector<SynthSpec> specs;
  int serial = 0;
  for (const auto& row : rows) {
    for (int i = 0; i < row.clips; ++i) {
      SynthSpec s;
      s.id = std::string(row.lang) + "_" +
             std::string(corpus_name(row.corpus)) + "_" + std::to_string(i);
      s.corpus = row.corpus;
      s.language = row.lang;
      s.seconds = row.seconds + 0.13 * (serial % 3);
      s.base_freq_hz = row.freq * (1.0 + 0.04 * i);
      s.amplitude = 0.22 + 0.02 * (i % 2);
      s.seed = seed;
      specs.push_back(std::move(s));
      ++serial;
    }
  }
  // One clip past the duration filter's default cutoff; it must vanish from
  // the filtered manifest.
  SynthSpec long_clip;
  long_clip.id = "eng_MLS_long";
  long_clip.corpus = Corpus::kMls;
  long_clip.language = "eng";
  long_clip.seconds = 16.5;
  long_clip.base_freq_hz = 150.0;
  long_clip.amplitude = 0.2;
  long_clip.seed = seed;
  specs.push_back(std::move(long_clip));
  return specs;
}

std::vector<SynthSpec> demo_noise_specs(std::uint64_t seed) {
  std::vector<SynthSpec> specs;
  for (int i = 0; i < 4; ++i) {
    SynthSpec s;
    s.id = "noise_" + std::to_string(i);
    s.corpus = Corpus::kDns;
    s.language = "und";
    s.seconds = 0.8 + 0.4 * i;
    s.base_freq_hz = 0.0;
    s.amplitude = 0.15;
    s.seed = seed;
    specs.push_back(std::move(s));
  }
  // A silent clip: augmentation must skip it via the retry path rather than
  // divide by zero.
  SynthSpec silent;
  silent.id = "noise_silent";
  silent.corpus = Corpus::kDns;
  silent.language = "und";
  silent.seconds = 1.0;
  silent.base_freq_hz = 0.0;
  silent.amplitude = 0.0;
  silent.seed = seed;
  specs.push_back(std::move(silent));
  return specs;
}

}  // namespace sslforge
