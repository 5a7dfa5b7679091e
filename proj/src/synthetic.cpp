#include "ser_audit/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "parallel.hpp"
#include "ser_audit/audio_io.hpp"
#include "ser_audit/error.hpp"
#include "ser_audit/features.hpp"
#include "ser_audit/random.hpp"

namespace ser_audit {

namespace {

double Uniform(SplitMix64& rng, double lo, double hi) { return lo + (hi - lo) * rng.NextUnit(); }

AudioClip MakeClip(std::uint64_t seed, std::size_t index) {
  SplitMix64 rng(DeriveStreamSeed(seed, "synthetic-clip", std::to_string(index)));
  const double fs = kProtocolSampleRate;
  const double duration = Uniform(rng, 0.6, 1.6);
  const double lead = Uniform(rng, 0.0, 0.2);
  const double tail = Uniform(rng, 0.0, 0.2);
  const double f0 = Uniform(rng, 100.0, 400.0);
  const int harmonics = 1 + static_cast<int>(rng.NextIndex(4));
  const double rolloff = Uniform(rng, 0.5, 2.0);
  const double amplitude = Uniform(rng, 0.05, 0.5);
  const double noise = amplitude * Uniform(rng, 0.001, 0.3);
  const double am_rate = Uniform(rng, 2.0, 8.0);
  const double am_depth = Uniform(rng, 0.0, 0.8);
  const double f_high = Uniform(rng, 1500.0, 5000.0);
  const double a_high = amplitude * Uniform(rng, 0.0, 0.5);

  const auto n_lead = static_cast<std::size_t>(lead * fs);
  const auto n_body = static_cast<std::size_t>(duration * fs);
  const auto n_tail = static_cast<std::size_t>(tail * fs);
  AudioClip clip;
  clip.samples.assign(n_lead + n_body + n_tail, 0.0f);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < n_body; ++i) {
    const double t = static_cast<double>(i) / fs;
    double v = 0.0;
    for (int h = 1; h <= harmonics; ++h) v += std::sin(two_pi * f0 * h * t) / std::pow(h, rolloff);
    v *= amplitude * (1.0 - am_depth * 0.5 * (1.0 - std::cos(two_pi * am_rate * t)));
    v += a_high * std::sin(two_pi * f_high * t);
    v += noise * rng.NextGaussian();
    clip.samples[n_lead + i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
  }
  return clip;
}

}  // namespace

SyntheticCorpus GenerateSyntheticCorpus(const std::filesystem::path& dir,
                                        const SyntheticOptions& options) {
  const std::size_t total = options.num_train + options.num_dev + options.num_test;
  if (total == 0) throw Error(ErrorCode::kInvalidArgument, "empty synthetic corpus");
  std::filesystem::create_directories(dir / "audio");

  std::vector<FeatureVector> features(total);
  std::vector<std::string> names(total);
  std::vector<std::string> errors(total);
  internal::ParallelFor(total, 0, [&](std::size_t i) {
    try {
      auto clip = MakeClip(options.seed, i);
      names[i] = "syn" + std::to_string(100000 + i).substr(1);
      WriteWav(clip, dir / "audio" / (names[i] + ".wav"), WavEncoding::kFloat32);
      features[i] = ExtractFeatures(clip);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (const auto& e : errors) {
    if (!e.empty()) throw Error(ErrorCode::kIo, "synthetic corpus: " + e);
  }

  // Standardize features over the corpus, then draw one coefficient vector
  // per dimension.
  std::array<double, kNumFeatures> mean{};
  std::array<double, kNumFeatures> sd{};
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    for (const auto& f : features) mean[j] += f[j];
    mean[j] /= static_cast<double>(total);
    for (const auto& f : features) sd[j] += (f[j] - mean[j]) * (f[j] - mean[j]);
    sd[j] = std::sqrt(sd[j] / static_cast<double>(total));
    if (sd[j] == 0.0) sd[j] = 1.0;
  }

  SplitMix64 coeff_rng(DeriveStreamSeed(options.seed, "synthetic-coefficients", ""));
  SplitMix64 noise_rng(DeriveStreamSeed(options.seed, "synthetic-noise", ""));
  std::vector<DimensionTriple> labels(total);
  for (Dimension d : kDimensions) {
    std::array<double, kNumFeatures> c{};
    for (auto& v : c) v = coeff_rng.NextGaussian();
    std::vector<double> score(total, 0.0);
    for (std::size_t i = 0; i < total; ++i) {
      for (std::size_t j = 0; j < kNumFeatures; ++j) {
        score[i] += c[j] * (features[i][j] - mean[j]) / sd[j];
      }
    }
    double m = 0.0;
    for (double s : score) m += s;
    m /= static_cast<double>(total);
    double v = 0.0;
    for (double s : score) v += (s - m) * (s - m);
    const double s_sd = std::sqrt(v / static_cast<double>(total));
    for (std::size_t i = 0; i < total; ++i) {
      const double label = 0.5 + options.label_std * (score[i] - m) / s_sd +
                           options.label_noise * noise_rng.NextGaussian();
      labels[i][d] = std::clamp(label, 0.0, 1.0);
    }
  }

  const auto scale = LabelScale::SevenPoint();
  const auto write_split = [&](std::size_t begin, std::size_t count, std::size_t speakers,
                               Split split) {
    std::vector<SampleRecord> records;
    speakers = std::max<std::size_t>(1, speakers);
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t i = begin + k;
      SampleRecord r;
      r.sample_id = names[i];
      r.audio_path = "audio/" + names[i] + ".wav";
      const std::size_t spk = k % speakers;
      r.speaker_id = std::string(SplitName(split)) + "_spk" + std::to_string(spk);
      r.sex = spk % 2 == 0 ? Sex::kFemale : Sex::kMale;
      for (Dimension d : kDimensions) {
        r.raw_labels[d] = std::clamp(scale.low() + (scale.high() - scale.low()) * labels[i][d],
                                     scale.low(), scale.high());
      }
      records.push_back(std::move(r));
    }
    const auto path = dir / (std::string(SplitName(split)) + ".csv");
    if (!records.empty()) WriteManifest(DatasetManifest(scale, std::move(records), split), path);
    return path;
  };

  SyntheticCorpus corpus;
  corpus.train_manifest = write_split(0, options.num_train, options.speakers_train, Split::kTrain);
  corpus.dev_manifest =
      write_split(options.num_train, options.num_dev, options.speakers_dev, Split::kDev);
  corpus.test_manifest = write_split(options.num_train + options.num_dev, options.num_test,
                                     options.speakers_test, Split::kTest);
  return corpus;
}

}  // namespace ser_audit
