#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace sslforge {

/// Mono waveform with its sample rate. Samples are float32 in nominal
/// [-1, 1]; augmented waveforms may exceed that range and are stored as IEEE
/// float so no clipping is ever applied.
struct WavData {
  std::vector<float> samples;
  std::uint32_t sample_rate = 0;
};

/// Reads a mono RIFF/WAVE file. Supports 16-bit PCM (scaled by 1/32768) and
/// 32-bit IEEE float (taken as-is). Throws Error for anything else.
WavData read_wav(const std::filesystem::path& path);

/// Writes mono 16-bit PCM, clamping samples to [-1, 1). Use only for data
/// known to be in range (e.g. synthesized clean audio).
void write_wav_pcm16(const std::filesystem::path& path,
                     std::span<const float> samples, std::uint32_t sample_rate);

/// Writes mono 32-bit IEEE float, preserving samples exactly. This is the
/// format used for augmented waveforms, whose mixed sums may leave [-1, 1].
void write_wav_float32(const std::filesystem::path& path,
                       std::span<const float> samples, std::uint32_t sample_rate);

}  // namespace sslforge
