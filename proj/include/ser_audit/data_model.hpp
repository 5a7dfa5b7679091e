#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ser_audit {

enum class Dimension { kArousal = 0, kDominance = 1, kValence = 2 };

inline constexpr std::array<Dimension, 3> kDimensions = {
    Dimension::kArousal, Dimension::kDominance, Dimension::kValence};

std::string_view DimensionName(Dimension d);

// Arousal, dominance and valence. Used both for raw labels (on a manifest's
// scale) and for normalized values in [0, 1].
struct DimensionTriple {
  double arousal = 0.0;
  double dominance = 0.0;
  double valence = 0.0;

  double& operator[](Dimension d);
  double operator[](Dimension d) const;

  friend bool operator==(const DimensionTriple&, const DimensionTriple&) = default;
};

// Clamps every component into [0, 1]. NaN maps to 0.
DimensionTriple ClampToUnit(const DimensionTriple& t);

class LabelScale {
 public:
  enum class Name { kSevenPoint, kFivePoint, kSentimentSeven };

  static LabelScale SevenPoint() { return LabelScale(Name::kSevenPoint, 1, 7); }
  static LabelScale FivePoint() { return LabelScale(Name::kFivePoint, 1, 5); }
  static LabelScale SentimentSeven() {
    return LabelScale(Name::kSentimentSeven, -3, 3);
  }
  // Accepts "seven-point", "five-point", "sentiment-seven".
  static LabelScale FromName(std::string_view name);

  Name name() const { return name_; }
  std::string_view name_string() const;
  double low() const { return low_; }
  double high() const { return high_; }
  bool Contains(double raw) const { return raw >= low_ && raw <= high_; }

  friend bool operator==(const LabelScale&, const LabelScale&) = default;

 private:
  LabelScale(Name name, double low, double high)
      : name_(name), low_(low), high_(high) {}

  Name name_;
  double low_;
  double high_;
};

// (raw - low) / (high - low). Throws kRange outside [low, high].
double NormalizeLabel(double raw, const LabelScale& scale);
DimensionTriple NormalizeTriple(const DimensionTriple& raw,
                                const LabelScale& scale);

enum class Sex { kFemale, kMale, kUnknown };

char SexCode(Sex s);
Sex SexFromCode(std::string_view code);

struct SampleRecord {
  std::string sample_id;
  std::string audio_path;
  std::string speaker_id;
  Sex sex = Sex::kUnknown;
  DimensionTriple raw_labels;
  std::optional<double> duration_s;
};

enum class Split { kTrain, kDev, kTest };

std::string_view SplitName(Split s);
Split SplitFromName(std::string_view name);

class DatasetManifest {
 public:
  // Validates every invariant; throws kRange, kDuplicate or kEmptySelection.
  DatasetManifest(LabelScale scale, std::vector<SampleRecord> records,
                  Split split = Split::kTest,
                  std::filesystem::path base_dir = {});

  const LabelScale& scale() const { return scale_; }
  const std::vector<SampleRecord>& records() const { return records_; }
  Split split() const { return split_; }
  std::size_t size() const { return records_.size(); }

  // Directory that relative audio paths are resolved against.
  const std::filesystem::path& base_dir() const { return base_dir_; }
  std::filesystem::path ResolveAudioPath(const SampleRecord& r) const;

  DimensionTriple NormalizedLabels(const SampleRecord& r) const {
    return NormalizeTriple(r.raw_labels, scale_);
  }

 private:
  LabelScale scale_;
  std::vector<SampleRecord> records_;
  Split split_;
  std::filesystem::path base_dir_;
};

// Manifest text format:
//   #scale=<seven-point|five-point|sentiment-seven>
//   [#split=<train|dev|test>]
//   sample_id,audio_path,speaker_id,sex,arousal,dominance,valence
//   <rows>
DatasetManifest ParseManifest(std::string_view text,
                              std::filesystem::path base_dir = {});
DatasetManifest LoadManifest(const std::filesystem::path& path);
std::string FormatManifest(const DatasetManifest& manifest);
void WriteManifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);

// Keeps records of speakers with strictly more than `min_n` samples.
// min_n == 0 keeps everything. Throws kEmptySelection when nothing survives.
DatasetManifest FilterSpeakersMinSamples(const DatasetManifest& manifest,
                                         std::size_t min_n);

std::string FormatNumber(double v);

}  // namespace ser_audit
