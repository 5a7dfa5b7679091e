#include "ser_audit/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "parallel.hpp"
#include "ser_audit/error.hpp"
#include "ser_audit/random.hpp"
#include "text_util.hpp"

namespace ser_audit {

namespace {

using Json = nlohmann::ordered_json;

double DbToAmplitude(double db) { return std::pow(10.0, db / 20.0); }

std::size_t CountParam(const DrawnParams& p) {
  if (!(p.value >= 0.0) || p.value != std::floor(p.value)) {
    throw Error(ErrorCode::kInvalidArgument,
                "sample count must be a non-negative integer, got " + FormatNumber(p.value));
  }
  return static_cast<std::size_t>(p.value);
}

void RequireProtocolRate(const AudioClip& clip) {
  if (clip.sample_rate != kProtocolSampleRate) {
    throw Error(ErrorCode::kUnsupportedFormat,
                "augmentations require 16000 Hz audio, got " +
                    std::to_string(clip.sample_rate));
  }
  if (clip.samples.empty()) {
    throw Error(ErrorCode::kInvalidLength, "empty clip");
  }
}

std::string CsvQuote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string_view KindName(AugmentationKind kind) {
  switch (kind) {
    case AugmentationKind::kAdditiveTone: return "additive_tone";
    case AugmentationKind::kAppendZeros: return "append_zeros";
    case AugmentationKind::kClip: return "clip";
    case AugmentationKind::kCropBeginning: return "crop_beginning";
    case AugmentationKind::kGain: return "gain";
    case AugmentationKind::kHighpassFilter: return "highpass_filter";
    case AugmentationKind::kLowpassFilter: return "lowpass_filter";
    case AugmentationKind::kWhiteNoise: return "white_noise";
  }
  return "?";
}

AugmentationKind KindFromName(std::string_view name) {
  for (auto kind : kAllAugmentations) {
    if (KindName(kind) == name) return kind;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown augmentation '" + std::string(name) + "'");
}

std::vector<AugmentationKind> ParseKinds(std::string_view list) {
  list = internal::Trim(list);
  if (list == "all") return {kAllAugmentations.begin(), kAllAugmentations.end()};
  std::vector<AugmentationKind> kinds;
  if (list.empty() || list == "none") return kinds;
  for (auto field : internal::SplitFields(list)) {
    const auto kind = KindFromName(field);
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
      kinds.push_back(kind);
    }
  }
  return kinds;
}

const ParamMenu& MenuFor(AugmentationKind kind) {
  static const std::array<ParamMenu, 8> menus = {{
      {AugmentationKind::kAdditiveTone, {40, 45, 50}, "dB", std::pair{5000.0, 7000.0}},
      {AugmentationKind::kAppendZeros, {100, 500, 1000}, "samples", std::nullopt},
      {AugmentationKind::kClip, {0.1, 0.2, 0.3}, "%", std::nullopt},
      {AugmentationKind::kCropBeginning, {100, 500, 1000}, "samples", std::nullopt},
      {AugmentationKind::kGain, {-2, -1, 1, 2}, "dB", std::nullopt},
      {AugmentationKind::kHighpassFilter, {50, 100, 150}, "Hz", std::nullopt},
      {AugmentationKind::kLowpassFilter, {7500, 7000, 6500}, "Hz", std::nullopt},
      {AugmentationKind::kWhiteNoise, {35, 40, 45}, "dB", std::nullopt},
  }};
  return menus[static_cast<std::size_t>(kind)];
}

std::string DrawnParams::ToJson() const {
  Json j;
  switch (kind) {
    case AugmentationKind::kAdditiveTone:
      j["frequency_hz"] = tone_frequency_hz;
      j["psnr_db"] = value;
      j["phase_rad"] = tone_phase;
      break;
    case AugmentationKind::kAppendZeros:
    case AugmentationKind::kCropBeginning:
      j["samples"] = static_cast<std::int64_t>(value);
      break;
    case AugmentationKind::kClip:
      j["percent"] = value;
      break;
    case AugmentationKind::kGain:
      j["gain_db"] = value;
      break;
    case AugmentationKind::kHighpassFilter:
    case AugmentationKind::kLowpassFilter:
      j["cutoff_hz"] = value;
      break;
    case AugmentationKind::kWhiteNoise:
      j["snr_db"] = value;
      j["noise_seed"] = noise_seed;
      break;
  }
  return j.dump();
}

DrawnParams DrawParams(AugmentationKind kind, std::uint64_t global_seed,
                       std::string_view sample_id) {
  SplitMix64 stream(DeriveStreamSeed(global_seed, sample_id, KindName(kind)));
  const auto& menu = MenuFor(kind);

  DrawnParams p;
  p.kind = kind;
  p.seed_trace = {global_seed, std::string(sample_id), kind};
  if (menu.continuous_range) {
    const auto [lo, hi] = *menu.continuous_range;
    p.tone_frequency_hz = lo + (hi - lo) * stream.NextUnit();
  }
  p.value = menu.choices[stream.NextIndex(menu.choices.size())];
  if (kind == AugmentationKind::kAdditiveTone) {
    p.tone_phase = 2.0 * std::numbers::pi * stream.NextUnit();
  }
  if (kind == AugmentationKind::kWhiteNoise) p.noise_seed = stream.Next();
  return p;
}

std::vector<float> FirstOrderFilter::Process(std::span<const float> input) const {
  std::vector<float> out(input.size());
  double x_prev = 0.0;
  double y_prev = 0.0;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double x = input[i];
    const double y = b0 * x + b1 * x_prev - a1 * y_prev;
    out[i] = static_cast<float>(y);
    x_prev = x;
    y_prev = y;
  }
  return out;
}

FirstOrderFilter DesignFirstOrderButterworth(double cutoff_hz, double sample_rate,
                                             FilterKind kind) {
  if (!(sample_rate > 0.0) || !(cutoff_hz > 0.0) || !(cutoff_hz < sample_rate / 2.0)) {
    throw Error(ErrorCode::kDesign, "cutoff " + FormatNumber(cutoff_hz) +
                                        " Hz must lie in (0, " +
                                        FormatNumber(sample_rate / 2.0) + ") Hz");
  }
  // Analog prototype H(s) = wc / (s + wc) (lowpass) or s / (s + wc), with
  // s = (1 - z^-1) / (1 + z^-1) after prewarping wc = tan(pi fc / fs).
  const double k = std::tan(std::numbers::pi * cutoff_hz / sample_rate);
  FirstOrderFilter f;
  f.cutoff_hz = cutoff_hz;
  f.kind = kind;
  f.a1 = (k - 1.0) / (k + 1.0);
  if (kind == FilterKind::kLowpass) {
    f.b0 = k / (k + 1.0);
    f.b1 = f.b0;
  } else {
    f.b0 = 1.0 / (k + 1.0);
    f.b1 = -f.b0;
  }
  return f;
}

double Rms(std::span<const float> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

double Peak(std::span<const float> x) {
  double peak = 0.0;
  for (float v : x) peak = std::max(peak, std::abs(static_cast<double>(v)));
  return peak;
}

AudioClip Apply(const AudioClip& clip, const DrawnParams& params) {
  RequireProtocolRate(clip);
  AudioClip out = clip;
  auto& s = out.samples;
  const auto n = s.size();

  switch (params.kind) {
    case AugmentationKind::kAdditiveTone: {
      const double peak = Peak(clip.samples);
      if (peak == 0.0) {
        throw Error(ErrorCode::kDegenerateInput, "additive tone on a silent clip");
      }
      const double amplitude = peak / DbToAmplitude(params.value);
      const double w = 2.0 * std::numbers::pi * params.tone_frequency_hz / clip.sample_rate;
      for (std::size_t i = 0; i < n; ++i) {
        s[i] = static_cast<float>(s[i] + amplitude * std::sin(w * static_cast<double>(i) +
                                                              params.tone_phase));
      }
      break;
    }
    case AugmentationKind::kAppendZeros:
      s.resize(n + CountParam(params), 0.0f);
      break;
    case AugmentationKind::kClip: {
      const auto k = static_cast<std::size_t>(
          std::llround(static_cast<double>(n) * params.value / 100.0));
      if (k == 0) break;
      std::vector<float> mags(n);
      std::transform(s.begin(), s.end(), mags.begin(), [](float v) { return std::abs(v); });
      // Threshold is the (n-k)-th smallest magnitude, so the k largest are cut.
      const float t = k >= n ? 0.0f : [&] {
        std::nth_element(mags.begin(), mags.begin() + (n - 1 - k), mags.end());
        return mags[n - 1 - k];
      }();
      for (auto& v : s) v = std::clamp(v, -t, t);
      break;
    }
    case AugmentationKind::kCropBeginning: {
      const auto count = CountParam(params);
      if (count >= n) {
        throw Error(ErrorCode::kInvalidLength,
                    "cannot crop " + std::to_string(count) + " samples from a clip of " +
                        std::to_string(n));
      }
      s.erase(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(count));
      break;
    }
    case AugmentationKind::kGain: {
      const double g = DbToAmplitude(params.value);
      for (auto& v : s) v = static_cast<float>(v * g);
      break;
    }
    case AugmentationKind::kHighpassFilter:
    case AugmentationKind::kLowpassFilter: {
      const auto kind = params.kind == AugmentationKind::kHighpassFilter
                            ? FilterKind::kHighpass
                            : FilterKind::kLowpass;
      s = DesignFirstOrderButterworth(params.value, clip.sample_rate, kind)
              .Process(clip.samples);
      break;
    }
    case AugmentationKind::kWhiteNoise: {
      const double rms = Rms(clip.samples);
      if (rms == 0.0) {
        throw Error(ErrorCode::kDegenerateInput, "white noise on a silent clip");
      }
      const double sigma = rms / DbToAmplitude(params.value);
      SplitMix64 noise(params.noise_seed);
      for (auto& v : s) v = static_cast<float>(v + sigma * noise.NextGaussian());
      break;
    }
  }
  return out;
}

std::string FormatDrawLog(std::span<const DrawLogRow> rows) {
  std::string out = "sample_id,kind,param_json,global_seed\n";
  for (const auto& r : rows) {
    out += r.sample_id + ',' + std::string(KindName(r.kind)) + ',' +
           CsvQuote(r.param_json) + ',' + std::to_string(r.global_seed) + '\n';
  }
  return out;
}

AugmentResult AugmentDataset(const DatasetManifest& manifest,
                             std::span<const AugmentationKind> kinds,
                             std::uint64_t global_seed,
                             const std::filesystem::path& out_dir, unsigned threads) {
  std::filesystem::create_directories(out_dir);
  const auto& records = manifest.records();

  struct PerSample {
    std::vector<DrawLogRow> log;
    std::vector<SampleRecord> outputs;
    std::optional<std::string> error;
  };
  std::vector<PerSample> results(records.size());

  internal::ParallelFor(records.size(), threads, [&](std::size_t i) {
    const auto& rec = records[i];
    auto& res = results[i];
    try {
      const auto clip = ReadWav(manifest.ResolveAudioPath(rec));
      for (auto kind : kinds) {
        const auto params = DrawParams(kind, global_seed, rec.sample_id);
        const auto augmented = Apply(clip, params);
        const auto file_name = rec.sample_id + "." + std::string(KindName(kind)) + ".wav";
        WriteWav(augmented, out_dir / file_name, WavEncoding::kFloat32);
        res.log.push_back({rec.sample_id, kind, params.ToJson(), global_seed});
        SampleRecord out_rec = rec;
        out_rec.sample_id = rec.sample_id + "." + std::string(KindName(kind));
        out_rec.audio_path = file_name;
        out_rec.duration_s = augmented.duration_s();
        res.outputs.push_back(std::move(out_rec));
      }
    } catch (const std::exception& e) {
      res.error = e.what();
    }
  });

  AugmentResult result;
  std::vector<SampleRecord> out_records;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& res = results[i];
    if (res.error) {
      result.failures.push_back({records[i].sample_id, *res.error});
      continue;
    }
    for (auto& row : res.log) result.log.push_back(std::move(row));
    for (auto& r : res.outputs) out_records.push_back(std::move(r));
  }
  if (!out_records.empty()) {
    result.manifest.emplace(manifest.scale(), std::move(out_records), manifest.split(),
                            out_dir);
  }

  const auto log_path = out_dir / "draws.csv";
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw Error(ErrorCode::kIo, "cannot write " + log_path.string());
  log << FormatDrawLog(result.log);
  return result;
}

}  // namespace ser_audit
