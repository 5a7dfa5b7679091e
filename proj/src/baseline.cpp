#include "ser_audit/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "parallel.hpp"
#include "ser_audit/audio_io.hpp"
#include "ser_audit/error.hpp"
#include "ser_audit/metrics.hpp"
#include "ser_audit/random.hpp"

namespace ser_audit {

namespace {

using Json = nlohmann::ordered_json;

constexpr std::size_t kParams = kNumFeatures + 1;

std::vector<double> Standardize(const FeatureSpec& spec, const FeatureVector& x) {
  std::vector<double> z(kParams);
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    z[j] = (x[j] - spec.mean[j]) / spec.scale[j];
  }
  z[kNumFeatures] = 1.0;
  return z;
}

FeatureSpec FitFeatureSpec(const std::vector<FeatureVector>& xs) {
  FeatureSpec spec;
  spec.names.assign(kFeatureNames.begin(), kFeatureNames.end());
  spec.mean.assign(kNumFeatures, 0.0);
  spec.scale.assign(kNumFeatures, 1.0);
  const auto n = static_cast<double>(xs.size());
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    double mean = 0.0;
    for (const auto& x : xs) mean += x[j];
    mean /= n;
    double var = 0.0;
    for (const auto& x : xs) var += (x[j] - mean) * (x[j] - mean);
    var /= n;
    spec.mean[j] = mean;
    // Constant features keep unit scale and contribute nothing.
    spec.scale[j] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return spec;
}

double Dot(const std::vector<double>& w, const std::vector<double>& z) {
  double acc = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) acc += w[j] * z[j];
  return acc;
}

// Ridge solution with an unpenalized bias column.
std::vector<double> LeastSquares(const std::vector<std::vector<double>>& z,
                                 const std::vector<double>& y, double ridge_per_sample) {
  const auto n = static_cast<Eigen::Index>(z.size());
  Eigen::MatrixXd a(n, kParams);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < kParams; ++j) a(i, static_cast<Eigen::Index>(j)) = z[i][j];
    b(i) = y[i];
  }
  Eigen::MatrixXd gram = a.transpose() * a;
  const double ridge = std::max(ridge_per_sample, 1e-9) * static_cast<double>(n);
  for (std::size_t j = 0; j < kNumFeatures; ++j) {
    gram(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) += ridge;
  }
  const Eigen::VectorXd w = gram.ldlt().solve(a.transpose() * b);
  return {w.data(), w.data() + w.size()};
}

DimensionTriple EvaluateCcc(const BaselineModel& model,
                            const std::vector<std::vector<double>>& z,
                            const std::vector<DimensionTriple>& labels) {
  DimensionTriple out;
  for (Dimension d : kDimensions) {
    const auto di = static_cast<std::size_t>(d);
    std::vector<double> truth(z.size());
    std::vector<double> pred(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      truth[i] = labels[i][d];
      pred[i] = Dot(model.weights[di], z[i]);
    }
    try {
      out[d] = Ccc(truth, pred);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateInput) throw;
      out[d] = 0.0;
    }
  }
  return out;
}

double MultitaskLoss(const DimensionTriple& ccc) {
  return ((1.0 - ccc.arousal) + (1.0 - ccc.dominance) + (1.0 - ccc.valence)) / 3.0;
}

double MeanOf(const DimensionTriple& t) { return (t.arousal + t.dominance + t.valence) / 3.0; }

}  // namespace

DimensionTriple BaselineModel::Predict(const FeatureVector& features) const {
  const auto z = Standardize(feature_spec, features);
  DimensionTriple out;
  for (Dimension d : kDimensions) out[d] = Dot(weights[static_cast<std::size_t>(d)], z);
  return out;
}

std::vector<std::size_t> SubsampleIndices(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "train_fraction must lie in (0, 1]");
  }
  // The small slack keeps products like 0.07 * 100 = 7.000000000000001 at 7.
  auto m = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  m = std::clamp<std::size_t>(m, n == 0 ? 0 : 1, n);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (m == n) return idx;
  SplitMix64 stream(DeriveStreamSeed(seed, "train-fraction", ""));
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + stream.NextIndex(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

TrainResult TrainBaseline(const LabeledFeatures& train, const LabeledFeatures& dev,
                          const TrainConfig& cfg) {
  if (train.features.size() != train.labels.size() ||
      dev.features.size() != dev.labels.size()) {
    throw Error(ErrorCode::kShape, "features and labels differ in length");
  }
  if (cfg.epochs < 1 || cfg.batch_size < 2 || !(cfg.learning_rate > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "need epochs >= 1, batch_size >= 2 and a positive learning rate");
  }
  if (dev.features.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "dev set needs at least 2 samples");
  }

  TrainResult result;
  result.train_indices = SubsampleIndices(train.features.size(), cfg.train_fraction, cfg.seed);
  result.train_size = result.train_indices.size();
  if (result.train_size < cfg.batch_size) {
    throw Error(ErrorCode::kInvalidArgument,
                "training subset has " + std::to_string(result.train_size) +
                    " samples, fewer than batch size " + std::to_string(cfg.batch_size));
  }

  for (const auto* set : {&train, &dev}) {
    for (const auto& f : set->features) {
      if (!std::all_of(f.begin(), f.end(), [](double v) { return std::isfinite(v); })) {
        throw Error(ErrorCode::kInvalidArgument, "non-finite feature value");
      }
    }
  }

  std::vector<FeatureVector> xs;
  std::vector<DimensionTriple> ys;
  for (std::size_t i : result.train_indices) {
    xs.push_back(train.features[i]);
    ys.push_back(train.labels[i]);
  }

  BaselineModel model;
  model.feature_spec = FitFeatureSpec(xs);
  std::vector<std::vector<double>> z;
  for (const auto& x : xs) z.push_back(Standardize(model.feature_spec, x));
  std::vector<std::vector<double>> z_dev;
  for (const auto& x : dev.features) z_dev.push_back(Standardize(model.feature_spec, x));

  for (Dimension d : kDimensions) {
    auto& w = model.weights[static_cast<std::size_t>(d)];
    if (cfg.least_squares_init) {
      std::vector<double> y(ys.size());
      for (std::size_t i = 0; i < ys.size(); ++i) y[i] = ys[i][d];
      w = LeastSquares(z, y, cfg.init_ridge);
    } else {
      w.assign(kParams, 0.0);
    }
  }

  result.initial_train_loss = MultitaskLoss(EvaluateCcc(model, z, ys));

  // ADAM state per dimension and parameter.
  std::array<std::vector<double>, 3> m1;
  std::array<std::vector<double>, 3> m2;
  for (std::size_t di = 0; di < 3; ++di) {
    m1[di].assign(kParams, 0.0);
    m2[di].assign(kParams, 0.0);
  }
  long step = 0;

  BaselineModel best = model;
  double best_score = -std::numeric_limits<double>::infinity();
  const std::size_t n = z.size();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    SplitMix64 shuffle(DeriveStreamSeed(cfg.seed, "epoch", std::to_string(epoch)));
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle.NextIndex(i + 1)]);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0, batch = 0; start < n; start += cfg.batch_size, ++batch) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      if (end - start < 2) break;  // CCC needs a population

      std::array<std::vector<double>, 3> grads;
      double batch_loss = 0.0;
      bool degenerate = false;
      for (Dimension d : kDimensions) {
        const auto di = static_cast<std::size_t>(d);
        std::vector<double> truth;
        std::vector<double> pred;
        for (std::size_t k = start; k < end; ++k) {
          truth.push_back(ys[order[k]][d]);
          pred.push_back(Dot(model.weights[di], z[order[k]]));
        }
        if (!std::all_of(pred.begin(), pred.end(), [](double v) { return std::isfinite(v); })) {
          throw Error(ErrorCode::kDivergence, "non-finite prediction at epoch " +
                                                  std::to_string(epoch) + ", batch " +
                                                  std::to_string(batch));
        }
        CccLossGrad lg;
        try {
          lg = CccLossGradient(truth, pred);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kDegenerateInput) throw;
          degenerate = true;
          break;
        }
        batch_loss += lg.loss / 3.0;
        grads[di].assign(kParams, 0.0);
        for (std::size_t k = start; k < end; ++k) {
          const double g = lg.grad[k - start] / 3.0;
          for (std::size_t j = 0; j < kParams; ++j) grads[di][j] += g * z[order[k]][j];
        }
      }
      if (degenerate) continue;
      if (!std::isfinite(batch_loss)) {
        throw Error(ErrorCode::kDivergence, "non-finite loss at epoch " +
                                                std::to_string(epoch) + ", batch " +
                                                std::to_string(batch));
      }
      loss_sum += batch_loss;
      ++batches;

      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t di = 0; di < 3; ++di) {
        for (std::size_t j = 0; j < kParams; ++j) {
          const double g = grads[di][j];
          m1[di][j] = cfg.beta1 * m1[di][j] + (1.0 - cfg.beta1) * g;
          m2[di][j] = cfg.beta2 * m2[di][j] + (1.0 - cfg.beta2) * g * g;
          const double m_hat = m1[di][j] / c1;
          const double v_hat = m2[di][j] / c2;
          model.weights[di][j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon);
        }
      }
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.mean_batch_loss = batches > 0 ? loss_sum / static_cast<double>(batches) : 0.0;
    entry.train_loss = MultitaskLoss(EvaluateCcc(model, z, ys));
    entry.dev_ccc = EvaluateCcc(model, z_dev, dev.labels);
    result.log.push_back(entry);
    model.trained_epochs = epoch;

    const double score = MeanOf(entry.dev_ccc);
    if (score > best_score) {
      best_score = score;
      best = model;
      best.best_epoch = epoch;
      best.best_dev_ccc = entry.dev_ccc;
    }
  }
  best.trained_epochs = cfg.epochs;
  result.model = std::move(best);
  return result;
}

LabeledFeatures ExtractLabeledFeatures(const DatasetManifest& manifest, unsigned threads) {
  const auto& records = manifest.records();
  LabeledFeatures out;
  out.features.resize(records.size());
  out.labels.resize(records.size());
  std::vector<std::string> errors(records.size());
  internal::ParallelFor(records.size(), threads, [&](std::size_t i) {
    try {
      out.features[i] = ExtractFeatures(ReadWav(manifest.ResolveAudioPath(records[i])));
      out.labels[i] = manifest.NormalizedLabels(records[i]);
    } catch (const std::exception& e) {
      errors[i] = records[i].sample_id + ": " + e.what();
    }
  });
  for (const auto& e : errors) {
    if (!e.empty()) throw Error(ErrorCode::kIo, e);
  }
  return out;
}

std::string ModelToJson(const BaselineModel& model) {
  Json j;
  j["model_version"] = 1;
  j["features"] = model.feature_spec.names;
  j["feature_mean"] = model.feature_spec.mean;
  j["feature_scale"] = model.feature_spec.scale;
  Json w;
  for (Dimension d : kDimensions) {
    w[std::string(DimensionName(d))] = model.weights[static_cast<std::size_t>(d)];
  }
  j["weights"] = w;
  j["trained_epochs"] = model.trained_epochs;
  j["best_epoch"] = model.best_epoch;
  Json ccc;
  for (Dimension d : kDimensions) ccc[std::string(DimensionName(d))] = model.best_dev_ccc[d];
  j["best_dev_ccc"] = ccc;
  return j.dump(2) + "\n";
}

BaselineModel ModelFromJson(const std::string& text) {
  BaselineModel m;
  try {
    const auto j = Json::parse(text);
    if (j.at("model_version").get<int>() != 1) {
      throw Error(ErrorCode::kParse, "unsupported model_version");
    }
    m.feature_spec.names = j.at("features").get<std::vector<std::string>>();
    m.feature_spec.mean = j.at("feature_mean").get<std::vector<double>>();
    m.feature_spec.scale = j.at("feature_scale").get<std::vector<double>>();
    for (Dimension d : kDimensions) {
      m.weights[static_cast<std::size_t>(d)] =
          j.at("weights").at(std::string(DimensionName(d))).get<std::vector<double>>();
      m.best_dev_ccc[d] = j.at("best_dev_ccc").at(std::string(DimensionName(d))).get<double>();
    }
    m.trained_epochs = j.at("trained_epochs").get<int>();
    m.best_epoch = j.at("best_epoch").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("model file: ") + e.what());
  }
  const std::vector<std::string> expected(kFeatureNames.begin(), kFeatureNames.end());
  if (m.feature_spec.names != expected || m.feature_spec.mean.size() != kNumFeatures ||
      m.feature_spec.scale.size() != kNumFeatures) {
    throw Error(ErrorCode::kParse, "model file: feature spec does not match this build");
  }
  for (const auto& w : m.weights) {
    if (w.size() != kParams) {
      throw Error(ErrorCode::kParse, "model file: weight vector must have " +
                                         std::to_string(kParams) + " entries");
    }
  }
  return m;
}

void SaveModel(const BaselineModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << ModelToJson(model);
}

BaselineModel LoadModel(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ModelFromJson(ss.str());
}

}  // namespace ser_audit
