#include "sslforge/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "sslforge/util.hpp"

namespace sslforge {
namespace {

constexpr std::uint32_t kSampleRate = 16000;
constexpr std::size_t kWindowSamples = 400;  // 25 ms at 16 kHz
constexpr std::size_t kFftSize = 512;
constexpr std::size_t kFftBins = kFftSize / 2 + 1;
constexpr std::size_t kNumFilters = 26;
constexpr std::size_t kNumCeps = 13;
constexpr double kPreemphasis = 0.97;
constexpr double kLowFreqHz = 20.0;
constexpr double kLogFloor = 1e-10;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

/// In-place iterative radix-2 FFT (decimation in time).
void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

struct MelFilterbank {
  // weights[f] is a (first_bin, per-bin weights) pair for triangle f.
  struct Filter {
    std::size_t first_bin = 0;
    std::vector<double> weights;
  };
  std::vector<Filter> filters;
};

const MelFilterbank& filterbank() {
  static const MelFilterbank bank = [] {
    MelFilterbank b;
    const double mel_lo = hz_to_mel(kLowFreqHz);
    const double mel_hi = hz_to_mel(kSampleRate / 2.0);
    std::vector<double> centers(kNumFilters + 2);
    for (std::size_t i = 0; i < centers.size(); ++i) {
      centers[i] = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                static_cast<double>(kNumFilters + 1);
    }
    b.filters.resize(kNumFilters);
    for (std::size_t f = 0; f < kNumFilters; ++f) {
      const double left = centers[f];
      const double center = centers[f + 1];
      const double right = centers[f + 2];
      MelFilterbank::Filter filt;
      bool started = false;
      for (std::size_t bin = 0; bin < kFftBins; ++bin) {
        const double hz =
            static_cast<double>(bin) * kSampleRate / static_cast<double>(kFftSize);
        const double mel = hz_to_mel(hz);
        double w = 0.0;
        if (mel > left && mel < right) {
          w = mel <= center ? (mel - left) / (center - left)
                            : (right - mel) / (right - center);
        }
        if (w > 0.0) {
          if (!started) {
            filt.first_bin = bin;
            started = true;
          }
          filt.weights.push_back(w);
        } else if (started) {
          break;
        }
      }
      b.filters[f] = std::move(filt);
    }
    return b;
  }();
  return bank;
}

// DCT-II with orthonormal scaling, truncated to kNumCeps rows.
const std::vector<double>& dct_matrix() {
  static const std::vector<double> m = [] {
    std::vector<double> dct(kNumCeps * kNumFilters);
    const double norm0 = std::sqrt(1.0 / kNumFilters);
    const double norm = std::sqrt(2.0 / kNumFilters);
    for (std::size_t k = 0; k < kNumCeps; ++k) {
      for (std::size_t n = 0; n < kNumFilters; ++n) {
        dct[k * kNumFilters + n] =
            (k == 0 ? norm0 : norm) *
            std::cos(std::numbers::pi * static_cast<double>(k) *
                     (2.0 * static_cast<double>(n) + 1.0) /
                     (2.0 * kNumFilters));
      }
    }
    return dct;
  }();
  return m;
}

const std::vector<double>& hamming_window() {
  static const std::vector<double> w = [] {
    std::vector<double> win(kWindowSamples);
    for (std::size_t n = 0; n < kWindowSamples; ++n) {
      win[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi *
                                      static_cast<double>(n) /
                                      static_cast<double>(kWindowSamples - 1));
    }
    return win;
  }();
  return w;
}

/// Appends delta features computed over a [frames x width] block with a
/// +/-2 frame regression window; frame indices are clamped at the edges.
std::vector<double> deltas(const std::vector<double>& src, std::size_t frames,
                           std::size_t width) {
  std::vector<double> out(src.size());
  constexpr int kDeltaWindow = 2;
  constexpr double kDenominator = 10.0;  // 2 * (1^2 + 2^2)
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t d = 0; d < width; ++d) {
      double acc = 0.0;
      for (int k = 1; k <= kDeltaWindow; ++k) {
        const std::size_t ahead =
            std::min(frames - 1, t + static_cast<std::size_t>(k));
        const std::size_t behind =
            t >= static_cast<std::size_t>(k) ? t - static_cast<std::size_t>(k)
                                             : 0;
        acc += k * (src[ahead * width + d] - src[behind * width + d]);
      }
      out[t * width + d] = acc / kDenominator;
    }
  }
  return out;
}

}  // namespace

bool is_valid_frame_shift(int frame_shift_ms) {
  for (const int shift : kValidFrameShiftsMs) {
    if (shift == frame_shift_ms) return true;
  }
  return false;
}

FrameFeatureSequence extract_features(std::span<const float> waveform,
                                      std::uint32_t sample_rate,
                                      int frame_shift_ms,
                                      std::string source_id) {
  if (sample_rate != kSampleRate) {
    throw Error("extract_features: expected a 16000 Hz waveform, got " +
                std::to_string(sample_rate) + " Hz for '" + source_id + "'");
  }
  if (!is_valid_frame_shift(frame_shift_ms)) {
    throw Error("extract_features: frame shift must be 20, 40, or 80 ms, got " +
                std::to_string(frame_shift_ms));
  }

  const std::size_t shift_samples =
      static_cast<std::size_t>(frame_shift_ms) * (kSampleRate / 1000);
  const std::size_t frames = waveform.size() / shift_samples;

  FrameFeatureSequence seq;
  seq.dim = 3 * kNumCeps;
  seq.frame_shift_ms = frame_shift_ms;
  seq.source_id = std::move(source_id);
  if (frames == 0) return seq;

  // Pre-emphasis over the whole signal, then framing.
  std::vector<double> emphasized(waveform.size());
  emphasized[0] = (1.0 - kPreemphasis) * static_cast<double>(waveform[0]);
  for (std::size_t i = 1; i < waveform.size(); ++i) {
    emphasized[i] = static_cast<double>(waveform[i]) -
                    kPreemphasis * static_cast<double>(waveform[i - 1]);
  }

  const auto& window = hamming_window();
  const auto& bank = filterbank();
  const auto& dct = dct_matrix();

  std::vector<double> cepstra(frames * kNumCeps);
  std::vector<std::complex<double>> buf(kFftSize);
  std::vector<double> power(kFftBins);
  std::vector<double> log_energies(kNumFilters);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t begin = t * shift_samples;
    for (std::size_t n = 0; n < kFftSize; ++n) {
      const std::size_t i = begin + n;
      const double s =
          (n < kWindowSamples && i < emphasized.size()) ? emphasized[i] : 0.0;
      buf[n] = {n < kWindowSamples ? s * window[n] : 0.0, 0.0};
    }
    fft_inplace(buf);
    for (std::size_t b = 0; b < kFftBins; ++b) {
      power[b] = std::norm(buf[b]);
    }
    for (std::size_t f = 0; f < kNumFilters; ++f) {
      const auto& filt = bank.filters[f];
      double acc = 0.0;
      for (std::size_t j = 0; j < filt.weights.size(); ++j) {
        acc += filt.weights[j] * power[filt.first_bin + j];
      }
      log_energies[f] = std::log(std::max(acc, kLogFloor));
    }
    for (std::size_t k = 0; k < kNumCeps; ++k) {
      double acc = 0.0;
      for (std::size_t f = 0; f < kNumFilters; ++f) {
        acc += dct[k * kNumFilters + f] * log_energies[f];
      }
      cepstra[t * kNumCeps + k] = acc;
    }
  }

  const std::vector<double> d1 = deltas(cepstra, frames, kNumCeps);
  const std::vector<double> d2 = deltas(d1, frames, kNumCeps);

  seq.data.resize(frames * seq.dim);
  for (std::size_t t = 0; t < frames; ++t) {
    double* row = seq.data.data() + t * seq.dim;
    std::copy_n(cepstra.data() + t * kNumCeps, kNumCeps, row);
    std::copy_n(d1.data() + t * kNumCeps, kNumCeps, row + kNumCeps);
    std::copy_n(d2.data() + t * kNumCeps, kNumCeps, row + 2 * kNumCeps);
  }
  return seq;
}

FrameFeatureSequence fuse_multires(std::span<const FrameFeatureSequence> streams) {
  if (streams.empty()) {
    throw Error("fuse_multires: no feature streams given");
  }
  int finest = streams[0].frame_shift_ms;
  for (const auto& s : streams) {
    if (s.source_id != streams[0].source_id) {
      throw Error("fuse_multires: streams mix utterances '" +
                  streams[0].source_id + "' and '" + s.source_id + "'");
    }
    if (s.frame_shift_ms <= 0) {
      throw Error("fuse_multires: invalid frame shift");
    }
    finest = std::min(finest, s.frame_shift_ms);
  }
  std::size_t target_frames = 0;
  bool found = false;
  for (const auto& s : streams) {
    if (s.frame_shift_ms == finest) {
      target_frames = s.frames();
      found = true;
      break;
    }
  }
  (void)found;

  FrameFeatureSequence out;
  out.frame_shift_ms = finest;
  out.source_id = streams[0].source_id;
  for (const auto& s : streams) {
    if (s.frame_shift_ms % finest != 0) {
      throw Error("fuse_multires: shift " + std::to_string(s.frame_shift_ms) +
                  " ms is not a multiple of the finest shift " +
                  std::to_string(finest) + " ms");
    }
    out.dim += s.dim;
  }
  if (target_frames == 0) return out;

  out.data.resize(target_frames * out.dim);
  std::size_t col = 0;
  for (const auto& s : streams) {
    const std::size_t factor =
        static_cast<std::size_t>(s.frame_shift_ms / finest);
    if (s.frames() == 0) {
      throw Error("fuse_multires: stream at " +
                  std::to_string(s.frame_shift_ms) +
                  " ms is empty but the finest stream has frames");
    }
    for (std::size_t t = 0; t < target_frames; ++t) {
      // Repeat each coarse row `factor` times; past the end, repeat the last.
      const std::size_t src_row = std::min(t / factor, s.frames() - 1);
      std::copy_n(s.frame(src_row).data(), s.dim,
                  out.data.data() + t * out.dim + col);
    }
    col += s.dim;
  }
  return out;
}

}  // namespace sslforge
