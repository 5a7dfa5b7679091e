#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ser_audit/audio_io.hpp"
#include "ser_audit/baseline.hpp"
#include "ser_audit/data_model.hpp"
#include "ser_audit/external.hpp"

namespace ser_audit {

inline constexpr std::string_view kCleanVariant = "clean";

struct PredictionRecord {
  std::string sample_id;
  std::string variant;  // "clean" or an augmentation name
  DimensionTriple values;
};

// Prediction file: header `sample_id,variant,arousal,dominance,valence`,
// values in [0, 1], (sample_id, variant) unique.
std::vector<PredictionRecord> ParsePredictionFile(std::string_view text);
std::vector<PredictionRecord> LoadPredictionFile(const std::filesystem::path& path);
std::string FormatPredictionFile(const std::vector<PredictionRecord>& rows);

// What a predictor is asked about. Backends that need audio use `clip` when
// present and otherwise read `audio_path`.
struct PredictionRequest {
  std::string sample_id;
  std::string variant{kCleanVariant};
  std::filesystem::path audio_path;
  const AudioClip* clip = nullptr;
};

struct PredictionOutcome {
  std::optional<DimensionTriple> values;
  std::string error;
};

class PredictorBackend {
 public:
  virtual ~PredictorBackend() = default;
  virtual DimensionTriple Predict(const PredictionRequest& request) = 0;
  // Default: one Predict call per request, failures captured per entry.
  virtual std::vector<PredictionOutcome> PredictMany(
      const std::vector<PredictionRequest>& requests);
};

class PredictorHandle {
 public:
  enum class Kind { kFileBacked, kExternalProcess, kBuiltinBaseline };

  // "file:<path>", "exec:<command line>" or "baseline:<model path>".
  static PredictorHandle FromSpec(const std::string& spec, SessionOptions session = {});
  static PredictorHandle FromPredictionFile(const std::filesystem::path& path);
  static PredictorHandle FromRecords(std::vector<PredictionRecord> rows, std::string identity);
  static PredictorHandle FromModel(BaselineModel model, std::string identity);
  static PredictorHandle FromExternal(const std::string& command_line, SessionOptions session = {});

  Kind kind() const { return kind_; }
  std::string_view kind_name() const;
  const std::string& identity() const { return identity_; }
  // Path of the backing file (prediction file or model), if any.
  const std::optional<std::filesystem::path>& source_path() const { return source_path_; }
  bool needs_audio() const { return kind_ != Kind::kFileBacked; }
  // Backend can be called from several threads at once.
  bool is_pure() const { return kind_ != Kind::kExternalProcess; }

  // Values are clamped to [0, 1].
  DimensionTriple Predict(const PredictionRequest& request);
  std::vector<PredictionOutcome> PredictMany(const std::vector<PredictionRequest>& requests);

  // Shuts down an external session; no-op otherwise.
  void Close();

 private:
  PredictorHandle(Kind kind, std::string identity, std::unique_ptr<PredictorBackend> backend)
      : kind_(kind), identity_(std::move(identity)), backend_(std::move(backend)) {}

  Kind kind_;
  std::string identity_;
  std::optional<std::filesystem::path> source_path_;
  std::unique_ptr<PredictorBackend> backend_;
};

// Rows of `rows` whose (sample_id, variant) is not asked for by the manifest
// and variant list, and manifest entries that have no row.
struct PredictionCoverage {
  std::vector<std::pair<std::string, std::string>> missing;
  std::vector<std::pair<std::string, std::string>> unmatched;
};

PredictionCoverage CheckCoverage(const DatasetManifest& manifest,
                                 const std::vector<std::string>& variants,
                                 const std::vector<PredictionRecord>& rows);

}  // namespace ser_audit
