#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ser_audit/data_model.hpp"
#include "ser_audit/features.hpp"

namespace ser_audit {

struct TrainConfig {
  double learning_rate = 1e-4;
  int epochs = 5;
  std::size_t batch_size = 32;
  double train_fraction = 1.0;  // (0, 1]; subset size is ceil(fraction * n)
  std::uint64_t seed = 0;
  // Start from the ridge least-squares solution on the training subset
  // instead of zeros. ADAM at 1e-4 moves a weight by at most ~1e-4 per step.
  bool least_squares_init = true;
  // Ridge penalty of the warm start, per training sample, on standardized
  // features. The bias is never penalized.
  double init_ridge = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

// Per-feature standardization learned on the training subset.
struct FeatureSpec {
  std::vector<std::string> names;
  std::vector<double> mean;
  std::vector<double> scale;
};

// One affine map per emotion dimension over standardized features. Each weight
// vector has feature count + 1 entries; the last is the bias.
struct BaselineModel {
  FeatureSpec feature_spec;
  std::array<std::vector<double>, 3> weights;
  int trained_epochs = 0;
  int best_epoch = 0;
  DimensionTriple best_dev_ccc;

  // Raw affine output; PredictorHandle clamps to [0, 1].
  DimensionTriple Predict(const FeatureVector& features) const;
};

struct LabeledFeatures {
  std::vector<FeatureVector> features;
  std::vector<DimensionTriple> labels;  // normalized to [0, 1]
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;       // multitask CCC loss on the full training subset after the epoch
  double mean_batch_loss = 0.0;  // average of the per-batch losses seen during the epoch
  DimensionTriple dev_ccc;
};

struct TrainResult {
  BaselineModel model;
  double initial_train_loss = 0.0;  // before the first update
  std::vector<EpochLog> log;
  std::size_t train_size = 0;  // after fraction subsampling
  std::vector<std::size_t> train_indices;
};

// Indices of the seeded uniform subsample, ascending. Size ceil(fraction * n).
std::vector<std::size_t> SubsampleIndices(std::size_t n, double fraction, std::uint64_t seed);

// Minimizes the mean over dimensions of (1 - CCC) per batch with ADAM and
// returns the weights of the epoch with the best mean dev CCC.
TrainResult TrainBaseline(const LabeledFeatures& train, const LabeledFeatures& dev,
                          const TrainConfig& cfg);

// Extracts features for every record. Audio read failures propagate.
LabeledFeatures ExtractLabeledFeatures(const DatasetManifest& manifest, unsigned threads = 0);

std::string ModelToJson(const BaselineModel& model);
BaselineModel ModelFromJson(const std::string& text);
void SaveModel(const BaselineModel& model, const std::filesystem::path& path);
BaselineModel LoadModel(const std::filesystem::path& path);

}  // namespace ser_audit
