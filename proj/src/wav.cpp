#include "sslforge/wav.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "sslforge/util.hpp"

namespace sslforge {
namespace {

static_assert(std::endian::native == std::endian::little,
              "wav io assumes a little-endian host");

void write_bytes(std::ofstream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ofstream& out, T value) {
  write_bytes(out, &value, sizeof(value));
}

struct FmtChunk {
  std::uint16_t format_tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
};

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatIeeeFloat = 3;

void write_header(std::ofstream& out, std::uint16_t format_tag,
                  std::uint32_t sample_rate, std::uint16_t bits_per_sample,
                  std::uint32_t data_bytes) {
  const std::uint16_t channels = 1;
  const std::uint16_t block_align = channels * bits_per_sample / 8;
  write_bytes(out, "RIFF", 4);
  write_pod<std::uint32_t>(out, 36 + data_bytes);
  write_bytes(out, "WAVE", 4);
  write_bytes(out, "fmt ", 4);
  write_pod<std::uint32_t>(out, 16);
  write_pod<std::uint16_t>(out, format_tag);
  write_pod<std::uint16_t>(out, channels);
  write_pod<std::uint32_t>(out, sample_rate);
  write_pod<std::uint32_t>(out, sample_rate * block_align);
  write_pod<std::uint16_t>(out, block_align);
  write_pod<std::uint16_t>(out, bits_per_sample);
  write_bytes(out, "data", 4);
  write_pod<std::uint32_t>(out, data_bytes);
}

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot open wav file: " + path.string());
  }
  char riff[4], wave[4];
  std::uint32_t riff_size = 0;
  in.read(riff, 4);
  in.read(reinterpret_cast<char*>(&riff_size), 4);
  in.read(wave, 4);
  if (!in || std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0) {
    throw Error("not a RIFF/WAVE file: " + path.string());
  }

  FmtChunk fmt;
  bool have_fmt = false;
  std::vector<char> data;
  bool have_data = false;
  while (in && !(have_fmt && have_data)) {
    char tag[4];
    std::uint32_t chunk_size = 0;
    in.read(tag, 4);
    in.read(reinterpret_cast<char*>(&chunk_size), 4);
    if (!in) break;
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (chunk_size < 16) {
        throw Error("wav fmt chunk too small in " + path.string());
      }
      std::vector<char> raw(chunk_size);
      in.read(raw.data(), chunk_size);
      if (!in) {
        throw Error("truncated wav fmt chunk in " + path.string());
      }
      std::memcpy(&fmt.format_tag, raw.data(), 2);
      std::memcpy(&fmt.channels, raw.data() + 2, 2);
      std::memcpy(&fmt.sample_rate, raw.data() + 4, 4);
      std::memcpy(&fmt.bits_per_sample, raw.data() + 14, 2);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data.resize(chunk_size);
      in.read(data.data(), chunk_size);
      if (!in) {
        // A short read would otherwise return silently zero-padded audio.
        throw Error("truncated wav data chunk in " + path.string());
      }
      have_data = true;
    } else {
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  if (!have_fmt || !have_data) {
    throw Error("wav file missing fmt or data chunk: " + path.string());
  }
  if (fmt.channels != 1) {
    throw Error("only mono wav is supported, got " +
                std::to_string(fmt.channels) + " channels in " + path.string());
  }

  WavData wav;
  wav.sample_rate = fmt.sample_rate;
  if (fmt.format_tag == kFormatPcm && fmt.bits_per_sample == 16) {
    const std::size_t n = data.size() / 2;
    wav.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::int16_t s;
      std::memcpy(&s, data.data() + 2 * i, 2);
      wav.samples[i] = static_cast<float>(s) / 32768.0f;
    }
  } else if (fmt.format_tag == kFormatIeeeFloat && fmt.bits_per_sample == 32) {
    const std::size_t n = data.size() / 4;
    wav.samples.resize(n);
    std::memcpy(wav.samples.data(), data.data(), n * 4);
  } else {
    throw Error("unsupported wav encoding (format " +
                std::to_string(fmt.format_tag) + ", " +
                std::to_string(fmt.bits_per_sample) + " bits) in " +
                path.string());
  }
  return wav;
}

void write_wav_pcm16(const std::filesystem::path& path,
                     std::span<const float> samples, std::uint32_t sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write wav file: " + path.string());
  }
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  write_header(out, kFormatPcm, sample_rate, 16, data_bytes);
  // Largest encodable value: 32767/32768. Values on the k/32768 grid map to
  // code k exactly, so a pcm16 round trip reproduces on-grid samples.
  constexpr float kMax = 32767.0f / 32768.0f;
  for (const float f : samples) {
    float v = f;
    if (v > kMax) v = kMax;
    if (v < -1.0f) v = -1.0f;
    const auto s = static_cast<std::int16_t>(std::lrintf(v * 32768.0f));
    write_pod(out, s);
  }
  if (!out) {
    throw Error("short write to wav file: " + path.string());
  }
}

void write_wav_float32(const std::filesystem::path& path,
                       std::span<const float> samples, std::uint32_t sample_rate) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot write wav file: " + path.string());
  }
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 4);
  write_header(out, kFormatIeeeFloat, sample_rate, 32, data_bytes);
  write_bytes(out, samples.data(), data_bytes);
  if (!out) {
    throw Error("short write to wav file: " + path.string());
  }
}

}  // namespace sslforge
