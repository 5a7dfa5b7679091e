#include "ser_audit/audit.hpp"

#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <unistd.h>

#include "parallel.hpp"
#include "ser_audit/baseline.hpp"
#include "ser_audit/error.hpp"
#include "ser_audit/synthetic.hpp"

namespace ser_audit {

namespace {

std::vector<std::string> VariantNames(const std::vector<AugmentationKind>& kinds) {
  std::vector<std::string> v{std::string(kCleanVariant)};
  for (auto k : kinds) v.emplace_back(KindName(k));
  return v;
}

std::filesystem::path DefaultWorkDir() {
  auto dir = std::filesystem::temp_directory_path() /
             ("ser-audit-" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

void CollectFromFile(const DatasetManifest& manifest, PredictorHandle& predictor,
                     PredictionTable& table) {
  const auto& records = manifest.records();
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t v = 0; v < table.variants.size(); ++v) {
      auto& slot = table.rows[i][v];
      try {
        slot.values = predictor.Predict({records[i].sample_id, table.variants[v], {}, nullptr});
      } catch (const Error& e) {
        slot.error = e.detail();
        slot.missing = e.code() == ErrorCode::kMissingPrediction;
      }
    }
  }
}

void CollectFromAudio(const DatasetManifest& manifest, PredictorHandle& predictor,
                      const CollectOptions& options, PredictionTable& table) {
  const auto& records = manifest.records();
  const bool external = predictor.kind() == PredictorHandle::Kind::kExternalProcess;
  std::filesystem::path work_dir;
  if (external) {
    work_dir = options.work_dir.empty() ? DefaultWorkDir() : options.work_dir;
    std::filesystem::create_directories(work_dir);
  }

  // External predictors get one pipelined batch once all audio is on disk.
  std::vector<std::vector<std::optional<PredictionRequest>>> pending(records.size());

  // Phase one only writes files for external predictors, so it may run in
  // parallel for them too.
  const unsigned threads = predictor.is_pure() || external ? options.threads : 1;
  internal::ParallelFor(records.size(), threads, [&](std::size_t i) {
    const auto& rec = records[i];
    auto& row = table.rows[i];
    const auto clean_path = std::filesystem::absolute(manifest.ResolveAudioPath(rec));
    AudioClip clip;
    try {
      clip = ReadWav(clean_path);
    } catch (const std::exception& e) {
      for (auto& slot : row) slot.error = e.what();
      return;
    }
    pending[i].resize(table.variants.size());
    for (std::size_t v = 0; v < table.variants.size(); ++v) {
      auto& slot = row[v];
      try {
        AudioClip variant_clip;
        PredictionRequest req{rec.sample_id, table.variants[v], clean_path, &clip};
        if (v > 0) {
          const auto kind = options.kinds[v - 1];
          variant_clip = Apply(clip, DrawParams(kind, options.seed, rec.sample_id));
          req.clip = &variant_clip;
          if (external) {
            req.audio_path = work_dir / (rec.sample_id + "." + table.variants[v] + ".wav");
            WriteWav(variant_clip, req.audio_path, WavEncoding::kFloat32);
          }
        }
        if (external) {
          req.clip = nullptr;
          pending[i][v] = req;
        } else {
          slot.values = predictor.Predict(req);
        }
      } catch (const std::exception& e) {
        slot.error = e.what();
      }
    }
  });

  if (!external) return;
  std::vector<PredictionRequest> requests;
  std::vector<std::pair<std::size_t, std::size_t>> where;
  for (std::size_t i = 0; i < pending.size(); ++i) {
    for (std::size_t v = 0; v < pending[i].size(); ++v) {
      if (pending[i][v]) {
        requests.push_back(*pending[i][v]);
        where.emplace_back(i, v);
      }
    }
  }
  try {
    const auto outcomes = predictor.PredictMany(requests);
    for (std::size_t k = 0; k < outcomes.size(); ++k) {
      auto& slot = table.rows[where[k].first][where[k].second];
      slot.values = outcomes[k].values;
      slot.error = outcomes[k].error;
    }
  } catch (const Error& e) {
    for (const auto& [i, v] : where) table.rows[i][v].error = e.what();
  }
}

std::vector<double> Column(const std::vector<DimensionTriple>& xs, Dimension d) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(x[d]);
  return out;
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path.string());
}

Json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

}  // namespace

PredictionTable CollectPredictions(const DatasetManifest& manifest, PredictorHandle& predictor,
                                   const CollectOptions& options) {
  PredictionTable table;
  table.variants = VariantNames(options.kinds);
  table.rows.assign(manifest.size(), std::vector<PredictionSlot>(table.variants.size()));
  if (predictor.needs_audio()) {
    CollectFromAudio(manifest, predictor, options, table);
  } else {
    CollectFromFile(manifest, predictor, table);
  }
  return table;
}

AuditReport Evaluate(const DatasetManifest& manifest, const InputDigest& manifest_digest,
                     PredictorHandle& predictor, const EvaluateOptions& options) {
  AuditReport report;
  report.predictor_kind = std::string(predictor.kind_name());
  report.predictor_identity = predictor.identity();
  report.manifest = manifest_digest;
  if (predictor.source_path()) {
    report.predictor_source =
        InputDigest{predictor.source_path()->string(), Sha256File(*predictor.source_path())};
  }
  report.options = options;
  report.num_samples = manifest.size();

  const auto table = CollectPredictions(
      manifest, predictor, {options.kinds, options.seed, options.work_dir, options.threads});
  const auto& records = manifest.records();

  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t v = 0; v < table.variants.size(); ++v) {
      const auto& slot = table.rows[i][v];
      if (slot.values) continue;
      SampleIssue issue{records[i].sample_id, table.variants[v], slot.error};
      (slot.missing ? report.missing_predictions : report.errors).push_back(std::move(issue));
    }
  }

  // Correctness.
  std::vector<DimensionTriple> truth;
  std::vector<DimensionTriple> pred;
  std::vector<std::size_t> with_clean;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (const auto& v = table.rows[i][0].values) {
      truth.push_back(manifest.NormalizedLabels(records[i]));
      pred.push_back(*v);
      with_clean.push_back(i);
    }
  }
  report.ccc_samples = with_clean.size();
  bool correctness_ok = with_clean.size() == records.size();
  try {
    DimensionTriple ccc;
    for (Dimension d : kDimensions) ccc[d] = Ccc(Column(truth, d), Column(pred, d));
    report.ccc = ccc;
  } catch (const Error&) {
    correctness_ok = false;
  }
  if (!correctness_ok) report.incomplete.emplace_back("correctness");

  // Robustness, paired by sample id.
  bool all_kinds = true;
  DimensionTriple sum;
  for (std::size_t k = 0; k < options.kinds.size(); ++k) {
    RobustnessEntry entry{options.kinds[k], 0, std::nullopt};
    std::vector<DimensionTriple> clean;
    std::vector<DimensionTriple> aug;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& c = table.rows[i][0].values;
      const auto& a = table.rows[i][k + 1].values;
      if (c && a) {
        clean.push_back(*c);
        aug.push_back(*a);
      }
    }
    entry.num_pairs = clean.size();
    if (!clean.empty()) {
      DimensionTriple score;
      for (Dimension d : kDimensions) {
        score[d] = RobustnessScore(Column(clean, d), Column(aug, d), options.robustness);
        sum[d] += score[d];
      }
      entry.score = score;
    } else {
      all_kinds = false;
    }
    if (clean.size() != records.size()) {
      report.incomplete.push_back("robustness/" + std::string(KindName(options.kinds[k])));
    }
    report.robustness.push_back(entry);
  }
  if (all_kinds && !options.kinds.empty()) {
    DimensionTriple mean;
    for (Dimension d : kDimensions) mean[d] = sum[d] / static_cast<double>(options.kinds.size());
    report.robustness_mean = mean;
  }

  // Fairness over sex-labelled rows.
  std::array<PairedSeries, 3> female;
  std::array<PairedSeries, 3> male;
  for (std::size_t k = 0; k < with_clean.size(); ++k) {
    const auto sex = records[with_clean[k]].sex;
    if (sex == Sex::kUnknown) continue;
    auto& group = sex == Sex::kFemale ? female : male;
    for (Dimension d : kDimensions) {
      const auto di = static_cast<std::size_t>(d);
      group[di].truth.push_back(truth[k][d]);
      group[di].pred.push_back(pred[k][d]);
    }
  }
  report.num_female = female[0].truth.size();
  report.num_male = male[0].truth.size();
  try {
    FairnessReport fr;
    for (Dimension d : kDimensions) {
      const auto di = static_cast<std::size_t>(d);
      auto& e = fr.per_dimension[di];
      if (female[di].truth.empty() || male[di].truth.empty()) {
        throw Error(ErrorCode::kEmptyGroup, female[di].truth.empty() ? "no female samples"
                                                                     : "no male samples");
      }
      e.fairness_score = SexFairnessScore(female[di], male[di]);
      e.ccc_female = Ccc(female[di]);
      e.ccc_male = Ccc(male[di]);
      e.fairness_bias = SexFairnessBias(female[di], male[di]);
    }
    report.fairness = fr;
  } catch (const Error& e) {
    report.fairness_error = e.what();
    report.incomplete.emplace_back("fairness");
  }

  // Per-speaker bootstrap over speakers with more than min_speaker_samples.
  std::optional<DatasetManifest> kept;
  try {
    kept = FilterSpeakersMinSamples(manifest, options.min_speaker_samples);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kEmptySelection) throw;
  }
  if (kept) {
    std::vector<std::string> order;
    std::map<std::string, SpeakerSeries> series;
    for (const auto& rec : kept->records()) {
      if (!series.contains(rec.speaker_id)) {
        order.push_back(rec.speaker_id);
        series[rec.speaker_id].speaker_id = rec.speaker_id;
      }
    }
    for (std::size_t k = 0; k < with_clean.size(); ++k) {
      const auto& rec = records[with_clean[k]];
      auto it = series.find(rec.speaker_id);
      if (it == series.end()) continue;
      it->second.truth.push_back(truth[k]);
      it->second.pred.push_back(pred[k]);
    }
    const BootstrapConfig cfg{options.bootstrap_draws, options.bootstrap_reps, options.seed};
    for (const auto& id : order) {
      SpeakerRow row{id, std::nullopt, {}};
      try {
        row.bootstrap = SpeakerBootstrapCcc(series[id], cfg, options.threads);
      } catch (const Error& e) {
        row.error = e.what();
        report.incomplete.push_back("speakers/" + id);
      }
      report.speakers.push_back(std::move(row));
    }
  }
  return report;
}

std::filesystem::path ModelPathForFraction(const std::filesystem::path& out, double fraction,
                                           bool sweep) {
  if (!sweep) return out;
  auto p = out;
  p.replace_filename(out.stem().string() + ".frac-" + FormatNumber(fraction) +
                     out.extension().string());
  return p;
}

int CmdAugment(const AugmentArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const auto manifest = LoadManifest(args.manifest);
    const auto kinds = ParseKinds(args.kinds);
    const auto seed = ResolveSeed(args.seed);
    const auto result = AugmentDataset(manifest, kinds, seed, args.out_dir, args.threads);
    if (result.manifest) WriteManifest(*result.manifest, args.out_dir / "augmented.csv");
    for (const auto& f : result.failures) err << "failed: " << f.sample_id << ": " << f.message << "\n";
    out << "wrote " << result.log.size() << " files to " << args.out_dir.string() << " ("
        << result.failures.size() << " failed samples)\n";
    return result.failures.empty() ? 0 : 1;
  } catch (const std::exception& e) {
    err << "augment: " << e.what() << "\n";
    return 2;
  }
}

int CmdEvaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const auto manifest = LoadManifest(args.manifest);
    EvaluateOptions options;
    options.kinds = ParseKinds(args.kinds);
    options.seed = ResolveSeed(args.seed);
    options.robustness.threshold = args.threshold;
    options.min_speaker_samples = args.min_speaker_samples;
    options.bootstrap_draws = args.bootstrap_draws;
    options.bootstrap_reps = args.bootstrap_reps;
    options.threads = args.threads;
    options.work_dir = args.work_dir;
    if (options.work_dir.empty() && !args.out.empty()) {
      options.work_dir = args.out.string() + ".work";
    }
    if (!(args.threshold > 0.0 && args.threshold < 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "--threshold must lie in (0, 1)");
    }

    auto predictor = PredictorHandle::FromSpec(args.predictor);
    const auto report = Evaluate(manifest, {args.manifest.string(), Sha256File(args.manifest)},
                                 predictor, options);
    predictor.Close();

    const auto json = ReportToJson(report);
    const auto text = json.dump(2) + "\n";
    if (args.out.empty()) {
      out << text;
    } else {
      WriteText(args.out, text);
      out << FormatSummary(json);
    }
    return report.complete() ? 0 : 1;
  } catch (const std::exception& e) {
    err << "evaluate: " << e.what() << "\n";
    return 2;
  }
}

int CmdTrainBaseline(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.train_fractions.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "no train fraction given");
    }
    if (args.init != "least-squares" && args.init != "zeros") {
      throw Error(ErrorCode::kInvalidArgument, "--init must be least-squares or zeros");
    }
    const auto train_manifest = LoadManifest(args.train_manifest);
    const auto dev_manifest = LoadManifest(args.dev_manifest);
    const auto train = ExtractLabeledFeatures(train_manifest, args.threads);
    const auto dev = ExtractLabeledFeatures(dev_manifest, args.threads);
    const bool sweep = args.train_fractions.size() > 1;

    Json summary;
    summary["train_manifest"] = {{"path", args.train_manifest.string()},
                                 {"sha256", Sha256File(args.train_manifest)}};
    summary["dev_manifest"] = {{"path", args.dev_manifest.string()},
                               {"sha256", Sha256File(args.dev_manifest)}};
    std::string log = "fraction,epoch,train_loss,mean_batch_loss,dev_ccc_arousal,dev_ccc_dominance,dev_ccc_valence\n";
    Json runs = Json::array();
    for (double fraction : args.train_fractions) {
      TrainConfig cfg;
      cfg.learning_rate = args.learning_rate;
      cfg.epochs = args.epochs;
      cfg.batch_size = args.batch_size;
      cfg.train_fraction = fraction;
      cfg.seed = ResolveSeed(args.seed);
      cfg.least_squares_init = args.init == "least-squares";
      cfg.init_ridge = args.init_ridge;
      summary["config"] = {{"learning_rate", cfg.learning_rate}, {"epochs", cfg.epochs},
                           {"batch_size", cfg.batch_size},       {"seed", cfg.seed},
                           {"init", args.init},
                           {"init_ridge", cfg.init_ridge}};
      const auto result = TrainBaseline(train, dev, cfg);
      const auto model_path = ModelPathForFraction(args.out, fraction, sweep);
      if (model_path.has_parent_path()) std::filesystem::create_directories(model_path.parent_path());
      SaveModel(result.model, model_path);

      Json epochs = Json::array();
      for (const auto& e : result.log) {
        log += FormatNumber(fraction) + "," + std::to_string(e.epoch) + "," +
               FormatNumber(e.train_loss) + "," + FormatNumber(e.mean_batch_loss);
        Json dev_ccc;
        for (Dimension d : kDimensions) {
          log += "," + FormatNumber(e.dev_ccc[d]);
          dev_ccc[std::string(DimensionName(d))] = e.dev_ccc[d];
        }
        log += "\n";
        epochs.push_back({{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"mean_batch_loss", e.mean_batch_loss},
                          {"dev_ccc", dev_ccc}});
      }
      Json best;
      for (Dimension d : kDimensions) {
        best[std::string(DimensionName(d))] = result.model.best_dev_ccc[d];
      }
      runs.push_back({{"fraction", fraction},
                      {"train_size", result.train_size},
                      {"best_epoch", result.model.best_epoch},
                      {"best_dev_ccc", best},
                      {"initial_train_loss", result.initial_train_loss},
                      {"model", model_path.string()},
                      {"epochs", epochs}});
      out << "fraction " << FormatNumber(fraction) << ": " << result.train_size
          << " training samples, best epoch " << result.model.best_epoch << ", dev CCC";
      for (Dimension d : kDimensions) {
        out << " " << DimensionName(d) << " " << FormatNumber(result.model.best_dev_ccc[d]);
      }
      out << " -> " << model_path.string() << "\n";
    }
    summary["runs"] = runs;
    WriteText(args.out.string() + ".log.csv", log);
    WriteText(args.out.string() + ".train.json", summary.dump(2) + "\n");
    return 0;
  } catch (const std::exception& e) {
    err << "train-baseline: " << e.what() << "\n";
    return 2;
  }
}

int CmdPredict(const PredictArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const auto manifest = LoadManifest(args.manifest);
    auto predictor = PredictorHandle::FromSpec(args.predictor);
    CollectOptions options{ParseKinds(args.kinds), ResolveSeed(args.seed), args.work_dir,
                           args.threads};
    if (options.work_dir.empty()) options.work_dir = args.out.string() + ".work";
    const auto table = CollectPredictions(manifest, predictor, options);
    predictor.Close();

    std::vector<PredictionRecord> rows;
    std::size_t failures = 0;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
      const auto& id = manifest.records()[i].sample_id;
      for (std::size_t v = 0; v < table.variants.size(); ++v) {
        const auto& slot = table.rows[i][v];
        if (slot.values) {
          rows.push_back({id, table.variants[v], *slot.values});
        } else {
          ++failures;
          err << "failed: " << id << " (" << table.variants[v] << "): " << slot.error << "\n";
        }
      }
    }
    WriteText(args.out, FormatPredictionFile(rows));
    out << "wrote " << rows.size() << " predictions to " << args.out.string() << "\n";
    return failures == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    err << "predict: " << e.what() << "\n";
    return 2;
  }
}

int CmdCompare(const CompareArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const auto result = CompareReports(ReadJsonFile(args.report_a), ReadJsonFile(args.report_b));
    const auto text = result.dump(2) + "\n";
    if (args.out.empty()) {
      out << text;
    } else {
      WriteText(args.out, text);
      out << "speaker agreement (Spearman)";
      for (const auto& [dim, v] : result["speakers"]["spearman"].items()) {
        out << " " << dim << " " << v.dump();
      }
      out << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    err << "compare: " << e.what() << "\n";
    return 2;
  }
}

int CmdSynth(const SynthArgs& args, std::ostream& out, std::ostream& err) {
  try {
    SyntheticOptions opt;
    opt.num_train = args.num_train;
    opt.num_dev = args.num_dev;
    opt.num_test = args.num_test;
    opt.speakers_test = args.speakers_test;
    opt.seed = ResolveSeed(args.seed);
    const auto corpus = GenerateSyntheticCorpus(args.out_dir, opt);
    out << "wrote " << corpus.train_manifest.string() << ", " << corpus.dev_manifest.string()
        << ", " << corpus.test_manifest.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "synth: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace ser_audit
