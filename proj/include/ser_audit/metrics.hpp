#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ser_audit/data_model.hpp"

namespace ser_audit {

// Ground truth and predictions for one emotion dimension.
struct PairedSeries {
  std::vector<double> truth;
  std::vector<double> pred;
};

// Lin's concordance correlation coefficient with population (1/n) moments:
//   2 cov(y, p) / (var(y) + var(p) + (mean(y) - mean(p))^2)
// Throws kShape on length mismatch or n < 2, kDegenerateInput when the
// denominator is zero.
double Ccc(std::span<const double> truth, std::span<const double> pred);
inline double Ccc(const PairedSeries& s) { return Ccc(s.truth, s.pred); }

struct CccLossGrad {
  double loss = 0.0;          // 1 - ccc
  std::vector<double> grad;   // d loss / d pred_i
};

CccLossGrad CccLossGradient(std::span<const double> truth, std::span<const double> pred);

// Pearson correlation; throws kDegenerateInput if either input is constant.
double Pearson(std::span<const double> a, std::span<const double> b);

// Pearson correlation of average ranks (ties share their mean rank).
double Spearman(std::span<const double> a, std::span<const double> b);

// 1-based ranks; tied values receive the mean of the ranks they span.
std::vector<double> AverageRanks(std::span<const double> values);

struct RobustnessConfig {
  double threshold = 0.05;  // strict: |clean - aug| < threshold counts as stable
};

// Fraction of indices with |clean_i - aug_i| < threshold.
double RobustnessScore(std::span<const double> clean, std::span<const double> augmented,
                       const RobustnessConfig& cfg = {});

// ccc(female) - ccc(male). Errors carry the group label.
double SexFairnessScore(const PairedSeries& female, const PairedSeries& male);

// mean(pred_f - truth_f) - mean(pred_m - truth_m).
double SexFairnessBias(const PairedSeries& female, const PairedSeries& male);

struct FairnessEntry {
  double ccc_female = 0.0;
  double ccc_male = 0.0;
  double fairness_score = 0.0;  // ccc_female - ccc_male, exactly
  double fairness_bias = 0.0;
};

struct FairnessReport {
  std::array<FairnessEntry, 3> per_dimension;  // indexed by Dimension
};

struct BootstrapConfig {
  std::size_t draw_size = 200;
  std::size_t repetitions = 1000;
  std::uint64_t seed = 0;
};

struct BootstrapStat {
  double mean = 0.0;
  double std = 0.0;          // population std over used repetitions
  std::size_t used = 0;
  std::size_t skipped = 0;   // degenerate resamples
};

struct SpeakerSeries {
  std::string speaker_id;
  std::vector<DimensionTriple> truth;
  std::vector<DimensionTriple> pred;
};

struct SpeakerBootstrap {
  std::string speaker_id;
  std::size_t num_samples = 0;
  std::array<BootstrapStat, 3> per_dimension;  // indexed by Dimension
};

// Repetition r draws cfg.draw_size indices with replacement from a SplitMix64
// stream seeded with FNV-1a("<seed>\x1F<speaker_id>\x1F<r>"); the same
// resample is scored on all three dimensions. Degenerate resamples are
// skipped and counted per dimension; a dimension with no usable repetition
// raises kDegenerateSpeaker.
SpeakerBootstrap SpeakerBootstrapCcc(const SpeakerSeries& speaker,
                                     const BootstrapConfig& cfg, unsigned threads = 1);

}  // namespace ser_audit
