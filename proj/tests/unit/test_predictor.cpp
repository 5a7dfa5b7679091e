#include <doctest.h>

#include <string>

#include "ser_audit/error.hpp"
#include "ser_audit/predictor.hpp"
#include "support/test_support.hpp"

using namespace ser_audit;
using ser_audit::testing::EchoPredictorPath;
using ser_audit::testing::ShellQuote;
using ser_audit::testing::TempDir;

namespace {

constexpr const char* kFile =
    "sample_id,variant,arousal,dominance,valence\n"
    "a,clean,0.1,0.2,0.3\n"
    "a,gain,0.15,0.2,0.3\n"
    "b,clean,1,0,0.5\n";

ErrorCode CodeOf(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInvalidArgument;
}

PredictionRequest Req(const std::string& id, const std::string& variant = "clean") {
  PredictionRequest r;
  r.sample_id = id;
  r.variant = variant;
  return r;
}

}  // namespace

TEST_CASE("prediction files parse and format") {
  const auto rows = ParsePredictionFile(kFile);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].variant == "gain");
  CHECK(rows[1].values == DimensionTriple{0.15, 0.2, 0.3});
  CHECK(ParsePredictionFile(FormatPredictionFile(rows)).size() == 3);
  CHECK(FormatPredictionFile(rows) == kFile);
}

TEST_CASE("prediction file errors") {
  const std::string header = "sample_id,variant,arousal,dominance,valence\n";
  CHECK(CodeOf([&] { ParsePredictionFile(header + "a,clean,1.2,0,0\n"); }) == ErrorCode::kRange);
  CHECK(CodeOf([&] { ParsePredictionFile(header + "a,clean,-0.1,0,0\n"); }) == ErrorCode::kRange);
  CHECK(CodeOf([&] { ParsePredictionFile(header + "a,clean,0,0,0\na,clean,1,1,1\n"); }) ==
        ErrorCode::kDuplicate);
  CHECK(CodeOf([&] { ParsePredictionFile(header + "a,clean,0,0\n"); }) == ErrorCode::kParse);
  CHECK(CodeOf([&] { ParsePredictionFile("id,arousal\n"); }) == ErrorCode::kParse);
}

TEST_CASE("file-backed predictor looks rows up by sample and variant") {
  auto h = PredictorHandle::FromRecords(ParsePredictionFile(kFile), "file:test");
  CHECK(h.kind() == PredictorHandle::Kind::kFileBacked);
  CHECK(h.kind_name() == "file");
  CHECK_FALSE(h.needs_audio());
  CHECK(h.Predict(Req("a")) == DimensionTriple{0.1, 0.2, 0.3});
  CHECK(h.Predict(Req("a", "gain")) == DimensionTriple{0.15, 0.2, 0.3});
  CHECK(h.Predict(Req("b")) == DimensionTriple{1, 0, 0.5});
  CHECK(CodeOf([&] { h.Predict(Req("a", "clip")); }) == ErrorCode::kMissingPrediction);
  const auto many = h.PredictMany({Req("a"), Req("zzz"), Req("b")});
  CHECK(many[0].values.has_value());
  CHECK_FALSE(many[1].values.has_value());
  CHECK(many[1].error.find("zzz") != std::string::npos);
  CHECK(many[2].values.has_value());
}

TEST_CASE("predictor specs dispatch on their scheme") {
  TempDir dir("spec");
  ser_audit::testing::WriteText(dir / "p.csv", kFile);
  auto file = PredictorHandle::FromSpec("file:" + (dir / "p.csv").string());
  CHECK(file.kind_name() == "file");
  REQUIRE(file.source_path());
  CHECK(*file.source_path() == dir / "p.csv");
  CHECK(CodeOf([] { PredictorHandle::FromSpec("grpc:localhost"); }) ==
        ErrorCode::kInvalidArgument);
  CHECK(CodeOf([] { PredictorHandle::FromSpec("no-scheme"); }) == ErrorCode::kInvalidArgument);
  CHECK(CodeOf([] { PredictorHandle::FromSpec("file:/does/not/exist.csv"); }) == ErrorCode::kIo);

  auto exec = PredictorHandle::FromSpec("exec:" + ShellQuote(EchoPredictorPath()) +
                                        " --name tiny");
  CHECK(exec.kind_name() == "exec");
  CHECK(exec.identity() == "exec:tiny");
  CHECK(exec.needs_audio());
  CHECK_FALSE(exec.is_pure());
  CHECK(exec.Predict(Req("q")) == DimensionTriple{0.25, 0.5, 0.75});
  exec.Close();
}

TEST_CASE("outputs are clamped to the unit interval") {
  auto exec = PredictorHandle::FromExternal(ShellQuote(EchoPredictorPath()) +
                                            " --values 1.5,-0.25,0.5");
  CHECK(exec.Predict(Req("x")) == DimensionTriple{1.0, 0.0, 0.5});
  const auto many = exec.PredictMany({Req("x"), Req("y", "gain")});
  REQUIRE(many.size() == 2);
  for (const auto& o : many) {
    REQUIRE(o.values);
    CHECK(*o.values == DimensionTriple{1.0, 0.0, 0.5});
  }
  exec.Close();

  BaselineModel model;
  model.feature_spec.names.assign(kFeatureNames.begin(), kFeatureNames.end());
  model.feature_spec.mean.assign(kNumFeatures, 0.0);
  model.feature_spec.scale.assign(kNumFeatures, 1.0);
  for (std::size_t k = 0; k < 3; ++k) model.weights[k].assign(kNumFeatures + 1, 0.0);
  model.weights[0].back() = 3.0;   // far above 1
  model.weights[1].back() = -2.0;  // far below 0
  model.weights[2].back() = 0.4;
  auto builtin = PredictorHandle::FromModel(model, "baseline:mem");
  CHECK(builtin.is_pure());
  const auto clip = ser_audit::testing::SpeechLike(4000, 2);
  PredictionRequest r = Req("c");
  r.clip = &clip;
  CHECK(builtin.Predict(r) == DimensionTriple{1.0, 0.0, 0.4});
}

TEST_CASE("coverage reports missing and unmatched rows") {
  const auto manifest = ParseManifest(
      "#scale=seven-point\n"
      "sample_id,audio_path,speaker_id,sex,arousal,dominance,valence\n"
      "a,a.wav,s,f,1,1,1\n"
      "b,b.wav,s,m,2,2,2\n");
  auto rows = ParsePredictionFile(std::string(kFile) + "ghost,clean,0,0,0\n");
  const auto cov = CheckCoverage(manifest, {"clean", "gain"}, rows);
  REQUIRE(cov.missing.size() == 1);
  CHECK(cov.missing[0] == std::pair<std::string, std::string>{"b", "gain"});
  REQUIRE(cov.unmatched.size() == 1);
  CHECK(cov.unmatched[0].first == "ghost");
}
