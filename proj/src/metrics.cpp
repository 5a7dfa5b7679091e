#include "ser_audit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include "parallel.hpp"
#include "ser_audit/error.hpp"
#include "ser_audit/random.hpp"

namespace ser_audit {

namespace {

struct Moments {
  double mean_a = 0.0;
  double mean_b = 0.0;
  double var_a = 0.0;
  double var_b = 0.0;
  double cov = 0.0;
};

void CheckPaired(std::span<const double> a, std::span<const double> b,
                 std::size_t min_len) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kShape, "length mismatch: " + std::to_string(a.size()) +
                                       " vs " + std::to_string(b.size()));
  }
  if (a.size() < min_len) {
    throw Error(ErrorCode::kShape, "need at least " + std::to_string(min_len) +
                                       " values, got " + std::to_string(a.size()));
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) {
      throw Error(ErrorCode::kInvalidArgument,
                  "non-finite value at index " + std::to_string(i));
    }
  }
}

double Mean(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v;
  return acc / static_cast<double>(x.size());
}

// Two-pass population moments, accumulated in index order.
Moments ComputeMoments(std::span<const double> a, std::span<const double> b) {
  Moments m;
  m.mean_a = Mean(a);
  m.mean_b = Mean(b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - m.mean_a;
    const double db = b[i] - m.mean_b;
    m.var_a += da * da;
    m.var_b += db * db;
    m.cov += da * db;
  }
  const auto n = static_cast<double>(a.size());
  m.var_a /= n;
  m.var_b /= n;
  m.cov /= n;
  return m;
}

double CccDenominator(const Moments& m) {
  const double shift = m.mean_a - m.mean_b;
  return m.var_a + m.var_b + shift * shift;
}

// CCC or nullopt when degenerate; inputs already validated.
std::optional<double> TryCcc(std::span<const double> truth, std::span<const double> pred) {
  const auto m = ComputeMoments(truth, pred);
  const double denom = CccDenominator(m);
  if (denom == 0.0) return std::nullopt;
  return 2.0 * m.cov / denom;
}

double GroupCcc(const PairedSeries& s, const char* group) {
  try {
    return Ccc(s);
  } catch (const Error& e) {
    throw Error(e.code(), std::string(group) + " group: " + e.detail());
  }
}

}  // namespace

double Ccc(std::span<const double> truth, std::span<const double> pred) {
  CheckPaired(truth, pred, 2);
  const auto value = TryCcc(truth, pred);
  if (!value) {
    throw Error(ErrorCode::kDegenerateInput,
                "CCC undefined: both series constant with equal means");
  }
  return *value;
}

CccLossGrad CccLossGradient(std::span<const double> truth, std::span<const double> pred) {
  CheckPaired(truth, pred, 2);
  const auto m = ComputeMoments(truth, pred);
  const double denom = CccDenominator(m);
  if (denom == 0.0) {
    throw Error(ErrorCode::kDegenerateInput,
                "CCC undefined: both series constant with equal means");
  }
  const double ccc = 2.0 * m.cov / denom;
  const auto n = static_cast<double>(truth.size());
  const double shift = m.mean_a - m.mean_b;  // mean(truth) - mean(pred)

  CccLossGrad out;
  out.loss = 1.0 - ccc;
  out.grad.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d_cov = (truth[i] - m.mean_a) / n;
    const double d_denom = 2.0 * (pred[i] - m.mean_b) / n - 2.0 * shift / n;
    const double d_ccc = (2.0 * d_cov * denom - 2.0 * m.cov * d_denom) / (denom * denom);
    out.grad[i] = -d_ccc;
  }
  return out;
}

double Pearson(std::span<const double> a, std::span<const double> b) {
  CheckPaired(a, b, 2);
  const auto m = ComputeMoments(a, b);
  if (m.var_a == 0.0 || m.var_b == 0.0) {
    throw Error(ErrorCode::kDegenerateInput, "correlation of a constant series");
  }
  return m.cov / std::sqrt(m.var_a * m.var_b);
}

std::vector<double> AverageRanks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

double Spearman(std::span<const double> a, std::span<const double> b) {
  CheckPaired(a, b, 2);
  const auto ra = AverageRanks(a);
  const auto rb = AverageRanks(b);
  return Pearson(ra, rb);
}

double RobustnessScore(std::span<const double> clean, std::span<const double> augmented,
                       const RobustnessConfig& cfg) {
  if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "robustness threshold must lie in (0, 1)");
  }
  CheckPaired(clean, augmented, 1);
  std::size_t stable = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (std::abs(clean[i] - augmented[i]) < cfg.threshold) ++stable;
  }
  return static_cast<double>(stable) / static_cast<double>(clean.size());
}

double SexFairnessScore(const PairedSeries& female, const PairedSeries& male) {
  return GroupCcc(female, "female") - GroupCcc(male, "male");
}

double SexFairnessBias(const PairedSeries& female, const PairedSeries& male) {
  const auto mean_residual = [](const PairedSeries& s, const char* group) {
    if (s.truth.empty()) {
      throw Error(ErrorCode::kEmptyGroup, std::string(group) + " group has no samples");
    }
    CheckPaired(s.truth, s.pred, 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < s.truth.size(); ++i) acc += s.pred[i] - s.truth[i];
    return acc / static_cast<double>(s.truth.size());
  };
  return mean_residual(female, "female") - mean_residual(male, "male");
}

SpeakerBootstrap SpeakerBootstrapCcc(const SpeakerSeries& speaker,
                                     const BootstrapConfig& cfg, unsigned threads) {
  if (cfg.draw_size < 2 || cfg.repetitions < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "bootstrap needs draw_size >= 2 and repetitions >= 1");
  }
  if (speaker.truth.size() != speaker.pred.size()) {
    throw Error(ErrorCode::kShape, "speaker '" + speaker.speaker_id +
                                       "': truth/prediction length mismatch");
  }
  if (speaker.truth.empty()) {
    throw Error(ErrorCode::kEmptySelection,
                "speaker '" + speaker.speaker_id + "' has no samples");
  }

  const std::size_t n = speaker.truth.size();
  // Per repetition and dimension; nullopt marks a degenerate resample.
  std::vector<std::array<std::optional<double>, 3>> scores(cfg.repetitions);

  internal::ParallelFor(cfg.repetitions, threads, [&](std::size_t r) {
    SplitMix64 stream(DeriveStreamSeed(cfg.seed, speaker.speaker_id, std::to_string(r)));
    std::array<std::vector<double>, 3> truth;
    std::array<std::vector<double>, 3> pred;
    for (auto& v : truth) v.reserve(cfg.draw_size);
    for (auto& v : pred) v.reserve(cfg.draw_size);
    for (std::size_t k = 0; k < cfg.draw_size; ++k) {
      const std::size_t idx = stream.NextIndex(n);
      for (Dimension d : kDimensions) {
        const auto di = static_cast<std::size_t>(d);
        truth[di].push_back(speaker.truth[idx][d]);
        pred[di].push_back(speaker.pred[idx][d]);
      }
    }
    for (std::size_t di = 0; di < 3; ++di) scores[r][di] = TryCcc(truth[di], pred[di]);
  });

  SpeakerBootstrap out;
  out.speaker_id = speaker.speaker_id;
  out.num_samples = n;
  for (std::size_t di = 0; di < 3; ++di) {
    auto& stat = out.per_dimension[di];
    double sum = 0.0;
    for (const auto& rep : scores) {
      if (rep[di]) {
        sum += *rep[di];
        ++stat.used;
      } else {
        ++stat.skipped;
      }
    }
    if (stat.used == 0) {
      throw Error(ErrorCode::kDegenerateSpeaker,
                  "speaker '" + speaker.speaker_id + "': every " +
                      std::string(DimensionName(kDimensions[di])) +
                      " resample is degenerate");
    }
    stat.mean = sum / static_cast<double>(stat.used);
    double sq = 0.0;
    for (const auto& rep : scores) {
      if (rep[di]) sq += (*rep[di] - stat.mean) * (*rep[di] - stat.mean);
    }
    stat.std = std::sqrt(sq / static_cast<double>(stat.used));
  }
  return out;
}

}  // namespace ser_audit
