#include "ser_audit/predictor.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "ser_audit/error.hpp"
#include "ser_audit/features.hpp"
#include "text_util.hpp"

namespace ser_audit {

namespace {

constexpr std::string_view kPredictionHeader = "sample_id,variant,arousal,dominance,valence";

using Key = std::pair<std::string, std::string>;

class FileBackend : public PredictorBackend {
 public:
  explicit FileBackend(const std::vector<PredictionRecord>& rows) {
    for (const auto& r : rows) table_.emplace(Key{r.sample_id, r.variant}, r.values);
  }

  DimensionTriple Predict(const PredictionRequest& request) override {
    const auto it = table_.find(Key{request.sample_id, request.variant});
    if (it == table_.end()) {
      throw Error(ErrorCode::kMissingPrediction,
                  "no prediction for (" + request.sample_id + ", " + request.variant + ")");
    }
    return it->second;
  }

 private:
  std::map<Key, DimensionTriple> table_;
};

class BaselineBackend : public PredictorBackend {
 public:
  explicit BaselineBackend(BaselineModel model) : model_(std::move(model)) {}

  DimensionTriple Predict(const PredictionRequest& request) override {
    if (request.clip != nullptr) return model_.Predict(ExtractFeatures(*request.clip));
    return model_.Predict(ExtractFeatures(ReadWav(request.audio_path)));
  }

 private:
  BaselineModel model_;
};

class ExternalBackend : public PredictorBackend {
 public:
  explicit ExternalBackend(ExternalSession session) : session_(std::move(session)) {}

  DimensionTriple Predict(const PredictionRequest& request) override {
    return session_.Predict(RequestId(request), request.audio_path.string());
  }

  std::vector<PredictionOutcome> PredictMany(
      const std::vector<PredictionRequest>& requests) override {
    std::vector<ExternalRequest> wire;
    wire.reserve(requests.size());
    for (const auto& r : requests) wire.push_back({RequestId(r), r.audio_path.string()});
    std::vector<PredictionOutcome> out;
    for (auto& o : session_.PredictMany(wire)) out.push_back({o.values, o.error});
    return out;
  }

  ExternalSession& session() { return session_; }

 private:
  static std::string RequestId(const PredictionRequest& r) {
    return r.variant == kCleanVariant ? r.sample_id : r.sample_id + "." + r.variant;
  }

  ExternalSession session_;
};

}  // namespace

std::vector<PredictionOutcome> PredictorBackend::PredictMany(
    const std::vector<PredictionRequest>& requests) {
  std::vector<PredictionOutcome> out(requests.size());
  for (std::size_t i = 0; i < requests.size(); ++i) {
    try {
      out[i].values = Predict(requests[i]);
    } catch (const std::exception& e) {
      out[i].error = e.what();
    }
  }
  return out;
}

std::vector<PredictionRecord> ParsePredictionFile(std::string_view text) {
  const auto lines = internal::SplitLines(text);
  std::vector<PredictionRecord> rows;
  std::set<Key> seen;
  bool header_seen = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = internal::Trim(lines[i]);
    const auto where = "line " + std::to_string(i + 1) + ": ";
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kPredictionHeader) {
        throw Error(ErrorCode::kParse,
                    where + "expected header '" + std::string(kPredictionHeader) + "'");
      }
      header_seen = true;
      continue;
    }
    const auto fields = internal::SplitFields(line);
    if (fields.size() != 5) {
      throw Error(ErrorCode::kParse, where + "expected 5 fields, got " +
                                         std::to_string(fields.size()));
    }
    PredictionRecord rec;
    rec.sample_id = std::string(fields[0]);
    rec.variant = std::string(fields[1]);
    for (Dimension d : kDimensions) {
      const auto field = fields[2 + static_cast<int>(d)];
      const auto v = internal::ParseDouble(field);
      if (!v) throw Error(ErrorCode::kParse, where + "bad value '" + std::string(field) + "'");
      if (!(*v >= 0.0 && *v <= 1.0)) {
        throw Error(ErrorCode::kRange, where + std::string(DimensionName(d)) + " " +
                                           std::string(field) + " outside [0, 1]");
      }
      rec.values[d] = *v;
    }
    if (!seen.insert({rec.sample_id, rec.variant}).second) {
      throw Error(ErrorCode::kDuplicate, where + "duplicate prediction for (" + rec.sample_id +
                                             ", " + rec.variant + ")");
    }
    rows.push_back(std::move(rec));
  }
  if (!header_seen) throw Error(ErrorCode::kParse, "missing header row");
  return rows;
}

std::vector<PredictionRecord> LoadPredictionFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return ParsePredictionFile(ss.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.detail());
  }
}

std::string FormatPredictionFile(const std::vector<PredictionRecord>& rows) {
  std::string out(kPredictionHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += r.sample_id + ',' + r.variant;
    for (Dimension d : kDimensions) out += ',' + FormatNumber(r.values[d]);
    out += '\n';
  }
  return out;
}

PredictorHandle PredictorHandle::FromSpec(const std::string& spec, SessionOptions session) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw Error(ErrorCode::kInvalidArgument,
                "predictor spec must be file:<path>, exec:<cmdline> or baseline:<model>");
  }
  const auto scheme = spec.substr(0, colon);
  const auto rest = spec.substr(colon + 1);
  if (rest.empty()) throw Error(ErrorCode::kInvalidArgument, "empty predictor target in " + spec);
  if (scheme == "file") return FromPredictionFile(rest);
  if (scheme == "exec") return FromExternal(rest, std::move(session));
  if (scheme == "baseline") {
    auto handle = FromModel(LoadModel(rest), "baseline:" + rest);
    handle.source_path_ = rest;
    return handle;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown predictor scheme '" + scheme + "'");
}

PredictorHandle PredictorHandle::FromPredictionFile(const std::filesystem::path& path) {
  auto handle = FromRecords(LoadPredictionFile(path), "file:" + path.string());
  handle.source_path_ = path;
  return handle;
}

PredictorHandle PredictorHandle::FromRecords(std::vector<PredictionRecord> rows,
                                             std::string identity) {
  return PredictorHandle(Kind::kFileBacked, std::move(identity),
                         std::make_unique<FileBackend>(rows));
}

PredictorHandle PredictorHandle::FromModel(BaselineModel model, std::string identity) {
  return PredictorHandle(Kind::kBuiltinBaseline, std::move(identity),
                         std::make_unique<BaselineBackend>(std::move(model)));
}

PredictorHandle PredictorHandle::FromExternal(const std::string& command_line,
                                              SessionOptions session) {
  auto s = ExternalSession::Open(command_line, std::move(session));
  auto identity = "exec:" + s.name();
  return PredictorHandle(Kind::kExternalProcess, std::move(identity),
                         std::make_unique<ExternalBackend>(std::move(s)));
}

std::string_view PredictorHandle::kind_name() const {
  switch (kind_) {
    case Kind::kFileBacked: return "file";
    case Kind::kExternalProcess: return "exec";
    case Kind::kBuiltinBaseline: return "baseline";
  }
  return "?";
}

DimensionTriple PredictorHandle::Predict(const PredictionRequest& request) {
  return ClampToUnit(backend_->Predict(request));
}

std::vector<PredictionOutcome> PredictorHandle::PredictMany(
    const std::vector<PredictionRequest>& requests) {
  auto out = backend_->PredictMany(requests);
  for (auto& o : out) {
    if (o.values) o.values = ClampToUnit(*o.values);
  }
  return out;
}

void PredictorHandle::Close() {
  if (kind_ == Kind::kExternalProcess) {
    static_cast<ExternalBackend&>(*backend_).session().Close();
  }
}

PredictionCoverage CheckCoverage(const DatasetManifest& manifest,
                                 const std::vector<std::string>& variants,
                                 const std::vector<PredictionRecord>& rows) {
  std::set<Key> wanted;
  for (const auto& r : manifest.records()) {
    for (const auto& v : variants) wanted.insert({r.sample_id, v});
  }
  std::set<Key> have;
  PredictionCoverage cov;
  for (const auto& row : rows) {
    Key key{row.sample_id, row.variant};
    have.insert(key);
    if (!wanted.contains(key)) cov.unmatched.push_back(std::move(key));
  }
  for (const auto& r : manifest.records()) {
    for (const auto& v : variants) {
      if (!have.contains({r.sample_id, v})) cov.missing.push_back({r.sample_id, v});
    }
  }
  return cov;
}

}  // namespace ser_audit
