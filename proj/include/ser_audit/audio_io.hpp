#pragma once

#include <filesystem>
#include <vector>

namespace ser_audit {

inline constexpr int kProtocolSampleRate = 16000;

struct AudioClip {
  std::vector<float> samples;  // nominal range [-1, 1]
  int sample_rate = kProtocolSampleRate;

  std::size_t size() const { return samples.size(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

enum class WavEncoding { kInt16, kFloat32 };

// Reads a mono 16 kHz RIFF/WAVE file holding 16-bit PCM or 32-bit IEEE float.
// 16-bit samples are divided by 32768. Anything else is rejected with
// kUnsupportedFormat; nothing is ever resampled.
AudioClip ReadWav(const std::filesystem::path& path);

// int16 clamps to [-1, 32767/32768] and rounds half away from zero.
void WriteWav(const AudioClip& clip, const std::filesystem::path& path,
              WavEncoding encoding = WavEncoding::kInt16);

std::vector<unsigned char> EncodeWav(const AudioClip& clip, WavEncoding encoding);
AudioClip DecodeWav(const std::vector<unsigned char>& bytes);

}  // namespace ser_audit
