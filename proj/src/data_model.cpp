#include "ser_audit/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "ser_audit/error.hpp"
#include "text_util.hpp"

namespace ser_audit {

namespace {

constexpr std::string_view kManifestHeader =
    "sample_id,audio_path,speaker_id,sex,arousal,dominance,valence";

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view DimensionName(Dimension d) {
  switch (d) {
    case Dimension::kArousal: return "arousal";
    case Dimension::kDominance: return "dominance";
    case Dimension::kValence: return "valence";
  }
  return "?";
}

double& DimensionTriple::operator[](Dimension d) {
  switch (d) {
    case Dimension::kArousal: return arousal;
    case Dimension::kDominance: return dominance;
    case Dimension::kValence: break;
  }
  return valence;
}

double DimensionTriple::operator[](Dimension d) const {
  return const_cast<DimensionTriple&>(*this)[d];
}

DimensionTriple ClampToUnit(const DimensionTriple& t) {
  DimensionTriple out;
  for (Dimension d : kDimensions) {
    const double v = t[d];
    out[d] = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
  }
  return out;
}

LabelScale LabelScale::FromName(std::string_view name) {
  if (name == "seven-point") return SevenPoint();
  if (name == "five-point") return FivePoint();
  if (name == "sentiment-seven") return SentimentSeven();
  throw Error(ErrorCode::kParse, "unknown label scale '" + std::string(name) + "'");
}

std::string_view LabelScale::name_string() const {
  switch (name_) {
    case Name::kSevenPoint: return "seven-point";
    case Name::kFivePoint: return "five-point";
    case Name::kSentimentSeven: return "sentiment-seven";
  }
  return "?";
}

double NormalizeLabel(double raw, const LabelScale& scale) {
  if (!scale.Contains(raw)) {
    throw Error(ErrorCode::kRange,
                "label " + FormatNumber(raw) + " outside " +
                    std::string(scale.name_string()) + " scale [" +
                    FormatNumber(scale.low()) + ", " +
                    FormatNumber(scale.high()) + "]");
  }
  return (raw - scale.low()) / (scale.high() - scale.low());
}

DimensionTriple NormalizeTriple(const DimensionTriple& raw,
                                const LabelScale& scale) {
  DimensionTriple out;
  for (Dimension d : kDimensions) out[d] = NormalizeLabel(raw[d], scale);
  return out;
}

char SexCode(Sex s) {
  switch (s) {
    case Sex::kFemale: return 'f';
    case Sex::kMale: return 'm';
    case Sex::kUnknown: break;
  }
  return 'u';
}

Sex SexFromCode(std::string_view code) {
  if (code == "f") return Sex::kFemale;
  if (code == "m") return Sex::kMale;
  if (code == "u") return Sex::kUnknown;
  throw Error(ErrorCode::kParse, "sex must be one of f/m/u, got '" +
                                     std::string(code) + "'");
}

std::string_view SplitName(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

Split SplitFromName(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "dev") return Split::kDev;
  if (name == "test") return Split::kTest;
  throw Error(ErrorCode::kParse, "unknown split '" + std::string(name) + "'");
}

DatasetManifest::DatasetManifest(LabelScale scale,
                                 std::vector<SampleRecord> records, Split split,
                                 std::filesystem::path base_dir)
    : scale_(scale),
      records_(std::move(records)),
      split_(split),
      base_dir_(std::move(base_dir)) {
  if (records_.empty()) {
    throw Error(ErrorCode::kEmptySelection, "manifest has no records");
  }
  std::unordered_set<std::string> seen;
  for (const auto& r : records_) {
    if (!seen.insert(r.sample_id).second) {
      throw Error(ErrorCode::kDuplicate, "duplicate sample_id '" + r.sample_id + "'");
    }
    for (Dimension d : kDimensions) {
      if (!scale_.Contains(r.raw_labels[d])) {
        throw Error(ErrorCode::kRange,
                    "sample '" + r.sample_id + "': " +
                        std::string(DimensionName(d)) + " " +
                        FormatNumber(r.raw_labels[d]) + " outside " +
                        std::string(scale_.name_string()) + " scale");
      }
    }
  }
}

std::filesystem::path DatasetManifest::ResolveAudioPath(
    const SampleRecord& r) const {
  std::filesystem::path p(r.audio_path);
  if (p.is_absolute() || base_dir_.empty()) return p;
  return base_dir_ / p;
}

DatasetManifest ParseManifest(std::string_view text,
                              std::filesystem::path base_dir) {
  using internal::SplitFields;
  using internal::Trim;

  const auto lines = internal::SplitLines(text);
  std::optional<LabelScale> scale;
  Split split = Split::kTest;
  bool header_seen = false;
  std::vector<SampleRecord> records;
  std::unordered_set<std::string> seen;

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto line = Trim(lines[i]);
    const auto where = "line " + std::to_string(line_no) + ": ";
    if (line.empty()) continue;
    if (!header_seen && line.starts_with('#')) {
      const auto directive = Trim(line.substr(1));
      if (directive.starts_with("scale=")) {
        try {
          scale = LabelScale::FromName(Trim(directive.substr(6)));
        } catch (const Error& e) {
          throw Error(ErrorCode::kParse, where + e.detail());
        }
      } else if (directive.starts_with("split=")) {
        try {
          split = SplitFromName(Trim(directive.substr(6)));
        } catch (const Error& e) {
          throw Error(ErrorCode::kParse, where + e.detail());
        }
      }
      continue;
    }
    if (!header_seen) {
      if (line != kManifestHeader) {
        throw Error(ErrorCode::kParse,
                    where + "expected header '" + std::string(kManifestHeader) + "'");
      }
      if (!scale) {
        throw Error(ErrorCode::kParse, where + "missing '#scale=' line before header");
      }
      header_seen = true;
      continue;
    }

    const auto fields = SplitFields(line);
    if (fields.size() != 7) {
      throw Error(ErrorCode::kParse, where + "expected 7 fields, got " +
                                         std::to_string(fields.size()));
    }
    SampleRecord rec;
    rec.sample_id = std::string(fields[0]);
    rec.audio_path = std::string(fields[1]);
    rec.speaker_id = std::string(fields[2]);
    if (rec.sample_id.empty()) {
      throw Error(ErrorCode::kParse, where + "empty sample_id");
    }
    try {
      rec.sex = SexFromCode(fields[3]);
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, where + e.detail());
    }
    for (Dimension d : kDimensions) {
      const auto field = fields[4 + static_cast<int>(d)];
      const auto v = internal::ParseDouble(field);
      if (!v || !std::isfinite(*v)) {
        throw Error(ErrorCode::kParse, where + "bad " + std::string(DimensionName(d)) +
                                           " value '" + std::string(field) + "'");
      }
      if (!scale->Contains(*v)) {
        throw Error(ErrorCode::kRange,
                    where + "sample '" + rec.sample_id + "': " +
                        std::string(DimensionName(d)) + " " + std::string(field) +
                        " outside " + std::string(scale->name_string()) + " scale [" +
                        FormatNumber(scale->low()) + ", " +
                        FormatNumber(scale->high()) + "]");
      }
      rec.raw_labels[d] = *v;
    }
    if (!seen.insert(rec.sample_id).second) {
      throw Error(ErrorCode::kDuplicate,
                  where + "duplicate sample_id '" + rec.sample_id + "'");
    }
    records.push_back(std::move(rec));
  }
  if (!header_seen) throw Error(ErrorCode::kParse, "missing header row");
  if (records.empty()) throw Error(ErrorCode::kParse, "manifest has no rows");
  return DatasetManifest(*scale, std::move(records), split, std::move(base_dir));
}

DatasetManifest LoadManifest(const std::filesystem::path& path) {
  return ParseManifest(ReadFile(path), path.parent_path());
}

std::string FormatManifest(const DatasetManifest& manifest) {
  std::string out = "#scale=";
  out.append(manifest.scale().name_string());
  out += "\n#split=";
  out.append(SplitName(manifest.split()));
  out += '\n';
  out.append(kManifestHeader);
  out += '\n';
  for (const auto& r : manifest.records()) {
    out += r.sample_id + ',' + r.audio_path + ',' + r.speaker_id + ',' +
           SexCode(r.sex);
    for (Dimension d : kDimensions) {
      out += ',';
      out += FormatNumber(r.raw_labels[d]);
    }
    out += '\n';
  }
  return out;
}

void WriteManifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << FormatManifest(manifest);
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

DatasetManifest FilterSpeakersMinSamples(const DatasetManifest& manifest,
                                         std::size_t min_n) {
  if (min_n == 0) return manifest;
  std::map<std::string, std::size_t> counts;
  for (const auto& r : manifest.records()) ++counts[r.speaker_id];
  std::vector<SampleRecord> kept;
  for (const auto& r : manifest.records()) {
    if (counts[r.speaker_id] > min_n) kept.push_back(r);
  }
  if (kept.empty()) {
    throw Error(ErrorCode::kEmptySelection,
                "no speaker has more than " + std::to_string(min_n) + " samples");
  }
  return DatasetManifest(manifest.scale(), std::move(kept), manifest.split(),
                         manifest.base_dir());
}

// Shortest representation that round-trips.
std::string FormatNumber(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

}  // namespace ser_audit
