#pragma once

#include <array>
#include <string_view>
#include <vector>

#include "ser_audit/audio_io.hpp"

namespace ser_audit {

inline constexpr std::array<std::string_view, 8> kFeatureNames = {
    "rms_energy",          "log_duration",      "zero_crossing_rate",
    "spectral_centroid_hz", "spectral_rolloff85_hz", "spectral_flatness",
    "log10_band_ratio_1khz", "energy_delta_rms",
};

inline constexpr std::size_t kNumFeatures = kFeatureNames.size();
inline constexpr int kFrameLength = 400;  // 25 ms at 16 kHz
inline constexpr int kFrameHop = 160;     // 10 ms at 16 kHz
inline constexpr int kFftSize = 512;

using FeatureVector = std::array<double, kNumFeatures>;

// Fixed acoustic descriptors of a clip. Spectral features are computed on the
// power spectrum summed over Hann-windowed frames. A clip shorter than one
// frame is zero-padded to a single frame. Throws kDegenerateInput on an
// all-zero clip.
FeatureVector ExtractFeatures(const AudioClip& clip);

// Power spectrum summed over frames, kFftSize / 2 + 1 bins.
std::vector<double> FramePowerSpectrum(const AudioClip& clip);

}  // namespace ser_audit
