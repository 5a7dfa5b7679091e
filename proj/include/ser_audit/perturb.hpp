#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ser_audit/audio_io.hpp"
#include "ser_audit/data_model.hpp"

namespace ser_audit {

enum class AugmentationKind {
  kAdditiveTone,
  kAppendZeros,
  kClip,
  kCropBeginning,
  kGain,
  kHighpassFilter,
  kLowpassFilter,
  kWhiteNoise,
};

inline constexpr std::array<AugmentationKind, 8> kAllAugmentations = {
    AugmentationKind::kAdditiveTone,   AugmentationKind::kAppendZeros,
    AugmentationKind::kClip,           AugmentationKind::kCropBeginning,
    AugmentationKind::kGain,           AugmentationKind::kHighpassFilter,
    AugmentationKind::kLowpassFilter,  AugmentationKind::kWhiteNoise,
};

// Canonical lower-case names ("additive_tone", "gain", ...). These appear in
// file names, prediction variants, reports and the seed hash.
std::string_view KindName(AugmentationKind kind);
AugmentationKind KindFromName(std::string_view name);
// Comma separated list of names, or "all".
std::vector<AugmentationKind> ParseKinds(std::string_view list);

struct ParamMenu {
  AugmentationKind kind;
  std::vector<double> choices;
  std::string unit;
  // Only the additive tone has one: its frequency range in Hz.
  std::optional<std::pair<double, double>> continuous_range;
};

const ParamMenu& MenuFor(AugmentationKind kind);

struct SeedTrace {
  std::uint64_t global_seed = 0;
  std::string sample_id;
  AugmentationKind kind = AugmentationKind::kGain;
};

// One concrete realization of an augmentation. `value` is the menu choice:
// PSNR dB (tone), sample count (append/crop), percent (clip), dB (gain),
// cutoff Hz (filters), SNR dB (noise).
struct DrawnParams {
  AugmentationKind kind = AugmentationKind::kGain;
  double value = 0.0;
  double tone_frequency_hz = 0.0;
  double tone_phase = 0.0;
  std::uint64_t noise_seed = 0;
  SeedTrace seed_trace;

  // Compact JSON of the drawn values, e.g. {"gain_db":-1}.
  std::string ToJson() const;
};

// Deterministic in (global_seed, sample_id, kind). The stream is SplitMix64
// seeded with FNV-1a("<seed>\x1F<sample_id>\x1F<kind name>"). Draw order:
// tone frequency, menu choice, tone phase; for white noise the next 64-bit
// output after the menu choice becomes the noise seed.
DrawnParams DrawParams(AugmentationKind kind, std::uint64_t global_seed,
                       std::string_view sample_id);

enum class FilterKind { kHighpass, kLowpass };

// Order-1 Butterworth section, direct form I:
//   y[n] = b0 x[n] + b1 x[n-1] - a1 y[n-1]
struct FirstOrderFilter {
  double b0 = 0.0;
  double b1 = 0.0;
  double a1 = 0.0;
  double cutoff_hz = 0.0;
  FilterKind kind = FilterKind::kLowpass;

  // Single causal pass, zero initial state.
  std::vector<float> Process(std::span<const float> input) const;
};

// Bilinear transform with prewarping, so the -3.0103 dB point lands exactly on
// the cutoff. Requires 0 < cutoff < fs/2.
FirstOrderFilter DesignFirstOrderButterworth(double cutoff_hz, double sample_rate,
                                             FilterKind kind);

double Rms(std::span<const float> x);
double Peak(std::span<const float> x);

AudioClip Apply(const AudioClip& clip, const DrawnParams& params);

struct DrawLogRow {
  std::string sample_id;
  AugmentationKind kind;
  std::string param_json;
  std::uint64_t global_seed;
};

struct SampleFailure {
  std::string sample_id;
  std::string message;
};

struct AugmentResult {
  // Records point at the written files (relative to out_dir); sample ids are
  // "<id>.<kind>".
  std::optional<DatasetManifest> manifest;
  std::vector<DrawLogRow> log;  // manifest order, then kind order
  std::vector<SampleFailure> failures;
};

// Writes <out_dir>/<sample_id>.<kind>.wav for every (sample, kind) and the
// sidecar log <out_dir>/draws.csv. Per-sample failures are collected.
AugmentResult AugmentDataset(const DatasetManifest& manifest,
                             std::span<const AugmentationKind> kinds,
                             std::uint64_t global_seed,
                             const std::filesystem::path& out_dir,
                             unsigned threads = 0);

std::string FormatDrawLog(std::span<const DrawLogRow> rows);

}  // namespace ser_audit
