#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ser_audit/data_model.hpp"
#include "ser_audit/metrics.hpp"
#include "ser_audit/perturb.hpp"
#include "ser_audit/predictor.hpp"

namespace ser_audit {

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr int kReportVersion = 1;

using Json = nlohmann::ordered_json;

// Predictions for every manifest row: index 0 is the clean variant, index
// 1 + k the k-th requested augmentation.
struct PredictionSlot {
  std::optional<DimensionTriple> values;
  std::string error;
  bool missing = false;  // file-backed predictor had no row
};

struct PredictionTable {
  std::vector<std::string> variants;
  std::vector<std::vector<PredictionSlot>> rows;  // [record][variant]
};

struct CollectOptions {
  std::vector<AugmentationKind> kinds;
  std::uint64_t seed = 0;
  // Augmented audio for external predictors is written here. Empty: a fresh
  // directory under the system temp dir.
  std::filesystem::path work_dir;
  unsigned threads = 0;
};

// Asks the predictor for the clean and augmented variant of every row. Audio
// backed predictors see augmentations drawn with DrawParams(kind, seed, id).
PredictionTable CollectPredictions(const DatasetManifest& manifest, PredictorHandle& predictor,
                                   const CollectOptions& options);

struct EvaluateOptions {
  std::vector<AugmentationKind> kinds{kAllAugmentations.begin(), kAllAugmentations.end()};
  std::uint64_t seed = 0;
  RobustnessConfig robustness;
  std::size_t min_speaker_samples = 200;
  std::size_t bootstrap_draws = 200;
  std::size_t bootstrap_reps = 1000;
  std::filesystem::path work_dir;
  unsigned threads = 0;
};

struct InputDigest {
  std::string path;
  std::string sha256;
};

struct RobustnessEntry {
  AugmentationKind kind;
  std::size_t num_pairs = 0;
  std::optional<DimensionTriple> score;
};

struct SpeakerRow {
  std::string speaker_id;
  std::optional<SpeakerBootstrap> bootstrap;
  std::string error;
};

struct SampleIssue {
  std::string sample_id;
  std::string variant;
  std::string message;
};

struct AuditReport {
  std::string predictor_kind;
  std::string predictor_identity;
  InputDigest manifest;
  std::optional<InputDigest> predictor_source;
  EvaluateOptions options;
  std::size_t num_samples = 0;

  std::size_t ccc_samples = 0;
  std::optional<DimensionTriple> ccc;

  std::vector<RobustnessEntry> robustness;
  std::optional<DimensionTriple> robustness_mean;  // over augmentations

  std::size_t num_female = 0;
  std::size_t num_male = 0;
  std::optional<FairnessReport> fairness;
  std::string fairness_error;

  std::vector<SpeakerRow> speakers;

  std::vector<std::string> incomplete;  // e.g. "robustness/gain"
  std::vector<SampleIssue> missing_predictions;
  std::vector<SampleIssue> errors;

  bool complete() const {
    return incomplete.empty() && missing_predictions.empty() && errors.empty();
  }
};

AuditReport Evaluate(const DatasetManifest& manifest, const InputDigest& manifest_digest,
                     PredictorHandle& predictor, const EvaluateOptions& options);

Json ReportToJson(const AuditReport& report);
// Human summary; every number is printed exactly as it appears in the JSON.
std::string FormatSummary(const Json& report);

// Per-speaker Spearman agreement of bootstrap means and per-dimension deltas
// (b - a).
Json CompareReports(const Json& a, const Json& b);

std::string Sha256Hex(std::string_view bytes);
std::string Sha256File(const std::filesystem::path& path);

// --seed, else SER_AUDIT_SEED, else 0.
std::uint64_t ResolveSeed(std::optional<std::uint64_t> flag);

// Command entry points. Each returns the process exit status.
struct AugmentArgs {
  std::filesystem::path manifest;
  std::string kinds = "all";
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir;
  unsigned threads = 0;
};

struct EvaluateArgs {
  std::filesystem::path manifest;
  std::string predictor;
  std::string kinds = "all";
  std::optional<std::uint64_t> seed;
  double threshold = 0.05;
  std::size_t min_speaker_samples = 200;
  std::size_t bootstrap_draws = 200;
  std::size_t bootstrap_reps = 1000;
  std::filesystem::path out;  // report JSON; empty writes it to stdout
  std::filesystem::path work_dir;
  unsigned threads = 0;
};

struct TrainArgs {
  std::filesystem::path train_manifest;
  std::filesystem::path dev_manifest;
  std::vector<double> train_fractions{1.0};
  double learning_rate = 1e-4;
  int epochs = 5;
  std::size_t batch_size = 32;
  std::optional<std::uint64_t> seed;
  std::string init = "least-squares";
  double init_ridge = 0.1;
  std::filesystem::path out;  // model file
  unsigned threads = 0;
};

struct PredictArgs {
  std::filesystem::path manifest;
  std::string predictor;
  std::string kinds = "none";
  std::optional<std::uint64_t> seed;
  std::filesystem::path out;
  std::filesystem::path work_dir;
  unsigned threads = 0;
};

struct CompareArgs {
  std::filesystem::path report_a;
  std::filesystem::path report_b;
  std::filesystem::path out;  // empty: stdout
};

struct SynthArgs {
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;
  std::size_t num_train = 300;
  std::size_t num_dev = 100;
  std::size_t num_test = 100;
  std::size_t speakers_test = 4;
};

int CmdAugment(const AugmentArgs& args, std::ostream& out, std::ostream& err);
int CmdEvaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err);
int CmdTrainBaseline(const TrainArgs& args, std::ostream& out, std::ostream& err);
int CmdPredict(const PredictArgs& args, std::ostream& out, std::ostream& err);
int CmdCompare(const CompareArgs& args, std::ostream& out, std::ostream& err);
int CmdSynth(const SynthArgs& args, std::ostream& out, std::ostream& err);

// Paths of the artifacts CmdTrainBaseline writes for a given fraction.
std::filesystem::path ModelPathForFraction(const std::filesystem::path& out, double fraction,
                                           bool sweep);

}  // namespace ser_audit
