#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include <openssl/evp.h>

#include "ser_audit/audit.hpp"
#include "ser_audit/error.hpp"

namespace ser_audit {

namespace {

Json TripleJson(const std::optional<DimensionTriple>& t) {
  Json j = Json::object();
  for (Dimension d : kDimensions) {
    j[std::string(DimensionName(d))] = t ? Json((*t)[d]) : Json(nullptr);
  }
  return j;
}

Json IssueList(const std::vector<SampleIssue>& issues) {
  Json arr = Json::array();
  for (const auto& i : issues) {
    arr.push_back({{"sample_id", i.sample_id}, {"variant", i.variant}, {"message", i.message}});
  }
  return arr;
}

std::string Num(const Json& v) { return v.dump(); }

std::string TripleLine(const Json& t) {
  std::string out;
  for (Dimension d : kDimensions) {
    const auto name = std::string(DimensionName(d));
    out += "  " + name + " " + Num(t.at(name));
  }
  return out;
}

const Json* Find(const Json& j, std::initializer_list<const char*> path) {
  const Json* cur = &j;
  for (const char* key : path) {
    if (!cur->is_object() || !cur->contains(key)) return nullptr;
    cur = &(*cur)[key];
  }
  return cur;
}

Json Delta(const Json* a, const Json* b) {
  Json out = Json::object();
  for (Dimension d : kDimensions) {
    const auto name = std::string(DimensionName(d));
    if (a && b && a->contains(name) && b->contains(name) && (*a)[name].is_number() &&
        (*b)[name].is_number()) {
      out[name] = (*b)[name].get<double>() - (*a)[name].get<double>();
    } else {
      out[name] = nullptr;
    }
  }
  return out;
}

}  // namespace

Json ReportToJson(const AuditReport& r) {
  Json j;
  j["report_version"] = kReportVersion;
  j["tool_version"] = std::string(kToolVersion);
  j["predictor"] = {{"kind", r.predictor_kind}, {"identity", r.predictor_identity}};

  Json kinds = Json::array();
  for (auto k : r.options.kinds) kinds.push_back(std::string(KindName(k)));
  Json prov;
  prov["seed"] = r.options.seed;
  prov["manifest"] = {{"path", r.manifest.path}, {"sha256", r.manifest.sha256}};
  prov["predictor_source"] =
      r.predictor_source
          ? Json{{"path", r.predictor_source->path}, {"sha256", r.predictor_source->sha256}}
          : Json(nullptr);
  prov["kinds"] = kinds;
  prov["threshold"] = r.options.robustness.threshold;
  prov["min_speaker_samples"] = r.options.min_speaker_samples;
  prov["bootstrap_draws"] = r.options.bootstrap_draws;
  prov["bootstrap_reps"] = r.options.bootstrap_reps;
  j["provenance"] = prov;
  j["num_samples"] = r.num_samples;

  j["correctness"] = {{"num_samples", r.ccc_samples}, {"ccc", TripleJson(r.ccc)}};

  Json per_aug = Json::object();
  for (const auto& e : r.robustness) {
    Json entry = TripleJson(e.score);
    entry["num_pairs"] = e.num_pairs;
    per_aug[std::string(KindName(e.kind))] = entry;
  }
  Json overall = nullptr;
  if (r.robustness_mean) {
    overall = (r.robustness_mean->arousal + r.robustness_mean->dominance +
               r.robustness_mean->valence) / 3.0;
  }
  j["robustness"] = {{"threshold", r.options.robustness.threshold},
                     {"per_augmentation", per_aug},
                     {"mean", TripleJson(r.robustness_mean)},
                     {"overall", overall}};

  Json fair;
  fair["num_female"] = r.num_female;
  fair["num_male"] = r.num_male;
  if (r.fairness) {
    Json per_dim = Json::object();
    for (Dimension d : kDimensions) {
      const auto& e = r.fairness->per_dimension[static_cast<std::size_t>(d)];
      per_dim[std::string(DimensionName(d))] = {{"ccc_female", e.ccc_female},
                                                {"ccc_male", e.ccc_male},
                                                {"fairness_score", e.fairness_score},
                                                {"fairness_bias", e.fairness_bias}};
    }
    fair["per_dimension"] = per_dim;
  } else {
    fair["per_dimension"] = nullptr;
  }
  fair["error"] = r.fairness_error.empty() ? Json(nullptr) : Json(r.fairness_error);
  j["fairness"] = fair;

  Json table = Json::array();
  for (const auto& s : r.speakers) {
    Json row;
    row["speaker_id"] = s.speaker_id;
    if (s.bootstrap) {
      row["num_samples"] = s.bootstrap->num_samples;
      for (Dimension d : kDimensions) {
        const auto& st = s.bootstrap->per_dimension[static_cast<std::size_t>(d)];
        row[std::string(DimensionName(d))] = {
            {"mean", st.mean}, {"std", st.std}, {"skipped", st.skipped}};
      }
      row["error"] = nullptr;
    } else {
      row["num_samples"] = nullptr;
      for (Dimension d : kDimensions) row[std::string(DimensionName(d))] = nullptr;
      row["error"] = s.error;
    }
    table.push_back(row);
  }
  j["speakers"] = {{"min_samples", r.options.min_speaker_samples},
                   {"draw_size", r.options.bootstrap_draws},
                   {"repetitions", r.options.bootstrap_reps},
                   {"table", table}};

  j["incomplete"] = r.incomplete;
  j["missing_predictions"] = IssueList(r.missing_predictions);
  j["errors"] = IssueList(r.errors);
  return j;
}

std::string FormatSummary(const Json& j) {
  std::ostringstream out;
  out << "predictor: " << j["predictor"]["identity"].get<std::string>() << "\n";
  out << "samples: " << Num(j["num_samples"]) << "\n";
  out << "CCC (n=" << Num(j["correctness"]["num_samples"]) << ")"
      << TripleLine(j["correctness"]["ccc"]) << "\n";

  const auto& rob = j["robustness"];
  out << "robustness (|clean - augmented| < " << Num(rob["threshold"]) << ")\n";
  for (const auto& [kind, entry] : rob["per_augmentation"].items()) {
    out << "  " << kind << " (n=" << Num(entry["num_pairs"]) << ")" << TripleLine(entry) << "\n";
  }
  out << "  mean" << TripleLine(rob["mean"]) << "  overall " << Num(rob["overall"]) << "\n";

  const auto& fair = j["fairness"];
  out << "fairness (female n=" << Num(fair["num_female"]) << ", male n=" << Num(fair["num_male"])
      << ")\n";
  if (fair["per_dimension"].is_object()) {
    for (const auto& [dim, e] : fair["per_dimension"].items()) {
      out << "  " << dim << " score " << Num(e["fairness_score"]) << " bias "
          << Num(e["fairness_bias"]) << " (ccc female " << Num(e["ccc_female"]) << ", male "
          << Num(e["ccc_male"]) << ")\n";
    }
  } else {
    out << "  unavailable: " << fair["error"].get<std::string>() << "\n";
  }

  const auto& spk = j["speakers"];
  out << "speakers with more than " << Num(spk["min_samples"])
      << " samples: " << spk["table"].size() << "\n";
  for (const auto& row : spk["table"]) {
    out << "  " << row["speaker_id"].get<std::string>();
    if (row["error"].is_null()) {
      for (Dimension d : kDimensions) {
        const auto name = std::string(DimensionName(d));
        out << "  " << name << " " << Num(row[name]["mean"]) << " +/- " << Num(row[name]["std"]);
      }
    } else {
      out << "  error: " << row["error"].get<std::string>();
    }
    out << "\n";
  }

  if (!j["incomplete"].empty()) {
    out << "incomplete:";
    for (const auto& s : j["incomplete"]) out << " " << s.get<std::string>();
    out << "\n";
  }
  if (!j["missing_predictions"].empty()) {
    out << "missing predictions: " << j["missing_predictions"].size() << "\n";
  }
  if (!j["errors"].empty()) out << "errors: " << j["errors"].size() << "\n";
  return out.str();
}

Json CompareReports(const Json& a, const Json& b) {
  Json out;
  out["compare_version"] = 1;
  const auto identity = [](const Json& r) {
    const Json* id = Find(r, {"predictor", "identity"});
    return id != nullptr && id->is_string() ? id->get<std::string>() : std::string();
  };
  out["report_a"] = identity(a);
  out["report_b"] = identity(b);

  // Speakers present (without error) in both tables, in report A's order.
  std::vector<std::pair<const Json*, const Json*>> common;
  const Json* table_a = Find(a, {"speakers", "table"});
  const Json* table_b = Find(b, {"speakers", "table"});
  if (table_a && table_b) {
    for (const auto& ra : *table_a) {
      if (!ra["error"].is_null()) continue;
      for (const auto& rb : *table_b) {
        if (rb["speaker_id"] == ra["speaker_id"] && rb["error"].is_null()) {
          common.emplace_back(&ra, &rb);
          break;
        }
      }
    }
  }
  Json ids = Json::array();
  for (const auto& [ra, rb] : common) ids.push_back((*ra)["speaker_id"]);

  Json spearman = Json::object();
  Json notes = Json::array();
  for (Dimension d : kDimensions) {
    const auto name = std::string(DimensionName(d));
    std::vector<double> xa;
    std::vector<double> xb;
    for (const auto& [ra, rb] : common) {
      xa.push_back((*ra)[name]["mean"].get<double>());
      xb.push_back((*rb)[name]["mean"].get<double>());
    }
    try {
      spearman[name] = Spearman(xa, xb);
    } catch (const Error& e) {
      spearman[name] = nullptr;
      notes.push_back(name + ": " + e.detail());
    }
  }
  out["speakers"] = {{"common", ids}, {"spearman", spearman}, {"notes", notes}};

  Json deltas;
  deltas["ccc"] = Delta(Find(a, {"correctness", "ccc"}), Find(b, {"correctness", "ccc"}));
  deltas["robustness_mean"] = Delta(Find(a, {"robustness", "mean"}), Find(b, {"robustness", "mean"}));
  for (const char* field : {"fairness_score", "fairness_bias"}) {
    Json fa = Json::object();
    Json fb = Json::object();
    const Json* pa = Find(a, {"fairness", "per_dimension"});
    const Json* pb = Find(b, {"fairness", "per_dimension"});
    for (Dimension d : kDimensions) {
      const auto name = std::string(DimensionName(d));
      if (pa && pa->is_object()) fa[name] = (*pa)[name][field];
      if (pb && pb->is_object()) fb[name] = (*pb)[name][field];
    }
    deltas[field] = Delta(&fa, &fb);
  }
  out["deltas"] = deltas;
  return out;
}

std::string Sha256Hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "sha256 failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof(buf), "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

std::string Sha256File(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return Sha256Hex(bytes);
}

std::uint64_t ResolveSeed(std::optional<std::uint64_t> flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SER_AUDIT_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (end != nullptr && *end == '\0') return v;
    throw Error(ErrorCode::kInvalidArgument, "SER_AUDIT_SEED must be an unsigned integer");
  }
  return 0;
}

}  // namespace ser_audit
