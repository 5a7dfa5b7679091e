#include "ser_audit/features.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include <fftw3.h>

#include "ser_audit/error.hpp"

namespace ser_audit {

namespace {

constexpr int kNumBins = kFftSize / 2 + 1;
constexpr double kBandSplitHz = 1000.0;

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

// The planner is not thread-safe; executing an existing plan on new arrays
// is. The plan is built once and shared.
fftw_plan SharedPlan() {
  static std::once_flag once;
  static fftw_plan plan = nullptr;
  std::call_once(once, [] {
    std::unique_ptr<double, FftwFree> in(fftw_alloc_real(kFftSize));
    std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(kNumBins));
    plan = fftw_plan_dft_r2c_1d(kFftSize, in.get(), out.get(), FFTW_ESTIMATE);
  });
  return plan;
}

const std::array<double, kFrameLength>& HannWindow() {
  static const auto window = [] {
    std::array<double, kFrameLength> w{};
    for (int i = 0; i < kFrameLength; ++i) {
      w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (kFrameLength - 1));
    }
    return w;
  }();
  return window;
}

std::vector<std::size_t> FrameStarts(std::size_t n) {
  std::vector<std::size_t> starts;
  if (n <= static_cast<std::size_t>(kFrameLength)) {
    starts.push_back(0);
    return starts;
  }
  for (std::size_t s = 0; s + kFrameLength <= n; s += kFrameHop) starts.push_back(s);
  return starts;
}

}  // namespace

std::vector<double> FramePowerSpectrum(const AudioClip& clip) {
  const auto plan = SharedPlan();
  std::unique_ptr<double, FftwFree> in(fftw_alloc_real(kFftSize));
  std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(kNumBins));
  const auto& window = HannWindow();
  const auto& x = clip.samples;

  std::vector<double> power(kNumBins, 0.0);
  for (std::size_t start : FrameStarts(x.size())) {
    std::fill(in.get(), in.get() + kFftSize, 0.0);
    for (int i = 0; i < kFrameLength && start + i < x.size(); ++i) {
      in.get()[i] = x[start + i] * window[i];
    }
    fftw_execute_dft_r2c(plan, in.get(), out.get());
    for (int k = 0; k < kNumBins; ++k) {
      const double re = out.get()[k][0];
      const double im = out.get()[k][1];
      power[k] += re * re + im * im;
    }
  }
  return power;
}

FeatureVector ExtractFeatures(const AudioClip& clip) {
  const auto& x = clip.samples;
  if (x.empty() || std::all_of(x.begin(), x.end(), [](float v) { return v == 0.0f; })) {
    throw Error(ErrorCode::kDegenerateInput, "cannot extract features from a silent clip");
  }
  const auto n = static_cast<double>(x.size());
  const double fs = clip.sample_rate;
  FeatureVector f{};

  double energy = 0.0;
  for (float v : x) energy += static_cast<double>(v) * v;
  f[0] = std::sqrt(energy / n);
  f[1] = std::log(n / fs);

  std::size_t crossings = 0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    if ((x[i - 1] < 0.0f && x[i] > 0.0f) || (x[i - 1] > 0.0f && x[i] < 0.0f)) ++crossings;
  }
  f[2] = x.size() > 1 ? static_cast<double>(crossings) / (n - 1.0) : 0.0;

  const auto power = FramePowerSpectrum(clip);
  const double bin_hz = fs / kFftSize;
  double total = 0.0;
  double weighted = 0.0;
  double low = 0.0;
  double high = 0.0;
  for (int k = 0; k < kNumBins; ++k) {
    const double hz = k * bin_hz;
    total += power[k];
    weighted += hz * power[k];
    (hz < kBandSplitHz ? low : high) += power[k];
  }
  f[3] = weighted / total;

  double cumulative = 0.0;
  f[4] = (kNumBins - 1) * bin_hz;
  for (int k = 0; k < kNumBins; ++k) {
    cumulative += power[k];
    if (cumulative >= 0.85 * total) {
      f[4] = k * bin_hz;
      break;
    }
  }

  const double floor = 1e-12 * total / kNumBins + 1e-300;
  double log_sum = 0.0;
  for (double p : power) log_sum += std::log(p + floor);
  f[5] = std::exp(log_sum / kNumBins) / (total / kNumBins + floor);

  f[6] = std::log10((low + floor) / (high + floor));

  std::vector<double> frame_rms;
  for (std::size_t start : FrameStarts(x.size())) {
    double e = 0.0;
    const std::size_t end = std::min(x.size(), start + kFrameLength);
    for (std::size_t i = start; i < end; ++i) e += static_cast<double>(x[i]) * x[i];
    frame_rms.push_back(std::sqrt(e / kFrameLength));
  }
  double delta_sq = 0.0;
  for (std::size_t t = 1; t < frame_rms.size(); ++t) {
    const double d = frame_rms[t] - frame_rms[t - 1];
    delta_sq += d * d;
  }
  f[7] = frame_rms.size() > 1 ? std::sqrt(delta_sq / (frame_rms.size() - 1)) : 0.0;

  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    if (!std::isfinite(f[i])) {
      throw Error(ErrorCode::kDegenerateInput,
                  "feature " + std::string(kFeatureNames[i]) + " is not finite");
    }
  }
  return f;
}

}  // namespace ser_audit
