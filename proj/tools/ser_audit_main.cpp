#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ser_audit/audit.hpp"

namespace {

void AddSeed(CLI::App* cmd, std::optional<std::uint64_t>& seed) {
  cmd->add_option("--seed", seed, "Global seed (falls back to SER_AUDIT_SEED, then 0)");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace ser_audit;

  CLI::App app{"Audit dimensional speech emotion models for correctness, robustness and fairness"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  AugmentArgs augment;
  auto* cmd_augment = app.add_subcommand("augment", "Write perturbed copies of every clip");
  cmd_augment->add_option("--manifest", augment.manifest, "Dataset manifest")->required();
  cmd_augment->add_option("--kinds", augment.kinds, "Comma separated augmentations or 'all'");
  AddSeed(cmd_augment, augment.seed);
  cmd_augment->add_option("--out", augment.out_dir, "Output directory")->required();
  cmd_augment->add_option("--threads", augment.threads, "Worker threads (0 = all cores)");

  EvaluateArgs evaluate;
  auto* cmd_evaluate = app.add_subcommand("evaluate", "Audit a predictor and write a report");
  cmd_evaluate->add_option("--manifest", evaluate.manifest, "Dataset manifest")->required();
  cmd_evaluate
      ->add_option("--predictor", evaluate.predictor,
                   "file:<predictions.csv> | exec:<command line> | baseline:<model.json>")
      ->required();
  cmd_evaluate->add_option("--kinds", evaluate.kinds, "Augmentations for robustness ('all', 'none', list)");
  AddSeed(cmd_evaluate, evaluate.seed);
  cmd_evaluate->add_option("--threshold", evaluate.threshold, "Robustness threshold")
      ->capture_default_str();
  cmd_evaluate->add_option("--min-speaker-samples", evaluate.min_speaker_samples,
                           "Bootstrap only speakers with more samples than this")
      ->capture_default_str();
  cmd_evaluate->add_option("--bootstrap-draws", evaluate.bootstrap_draws, "Samples per resample")
      ->capture_default_str();
  cmd_evaluate->add_option("--bootstrap-reps", evaluate.bootstrap_reps, "Resamples per speaker")
      ->capture_default_str();
  cmd_evaluate->add_option("--out", evaluate.out, "Report JSON path (default: stdout)");
  cmd_evaluate->add_option("--work-dir", evaluate.work_dir,
                           "Where augmented audio for exec predictors is written");
  cmd_evaluate->add_option("--threads", evaluate.threads, "Worker threads (0 = all cores)");

  TrainArgs train;
  auto* cmd_train = app.add_subcommand("train-baseline", "Train the built-in baseline with CCC loss");
  cmd_train->add_option("--manifest", train.train_manifest, "Training manifest")->required();
  cmd_train->add_option("--dev-manifest", train.dev_manifest, "Development manifest")->required();
  cmd_train->add_option("--train-fraction", train.train_fractions,
                        "Fraction(s) of the training set; several values run a sweep")
      ->delimiter(',');
  cmd_train->add_option("--learning-rate", train.learning_rate)->capture_default_str();
  cmd_train->add_option("--epochs", train.epochs)->capture_default_str();
  cmd_train->add_option("--batch-size", train.batch_size)->capture_default_str();
  cmd_train->add_option("--init", train.init, "least-squares | zeros")->capture_default_str();
  cmd_train->add_option("--init-ridge", train.init_ridge, "Ridge penalty of the warm start")
      ->capture_default_str();
  AddSeed(cmd_train, train.seed);
  cmd_train->add_option("--out", train.out, "Model file")->required();
  cmd_train->add_option("--threads", train.threads, "Worker threads (0 = all cores)");

  PredictArgs predict;
  auto* cmd_predict = app.add_subcommand("predict", "Write a prediction file");
  cmd_predict->add_option("--manifest", predict.manifest, "Dataset manifest")->required();
  cmd_predict->add_option("--predictor", predict.predictor, "exec:<command line> | baseline:<model.json>")
      ->required();
  cmd_predict->add_option("--kinds", predict.kinds, "Also predict these augmented variants");
  AddSeed(cmd_predict, predict.seed);
  cmd_predict->add_option("--out", predict.out, "Prediction file")->required();
  cmd_predict->add_option("--work-dir", predict.work_dir);
  cmd_predict->add_option("--threads", predict.threads, "Worker threads (0 = all cores)");

  CompareArgs compare;
  auto* cmd_compare = app.add_subcommand("compare", "Compare two audit reports");
  cmd_compare->add_option("report_a", compare.report_a)->required();
  cmd_compare->add_option("report_b", compare.report_b)->required();
  cmd_compare->add_option("--out", compare.out, "Comparison JSON path (default: stdout)");

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth", "Generate a synthetic corpus with recoverable labels");
  cmd_synth->add_option("--out", synth.out_dir, "Output directory")->required();
  AddSeed(cmd_synth, synth.seed);
  cmd_synth->add_option("--train", synth.num_train)->capture_default_str();
  cmd_synth->add_option("--dev", synth.num_dev)->capture_default_str();
  cmd_synth->add_option("--test", synth.num_test)->capture_default_str();
  cmd_synth->add_option("--test-speakers", synth.speakers_test)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  if (*cmd_augment) return CmdAugment(augment, std::cout, std::cerr);
  if (*cmd_evaluate) return CmdEvaluate(evaluate, std::cout, std::cerr);
  if (*cmd_train) return CmdTrainBaseline(train, std::cout, std::cerr);
  if (*cmd_predict) return CmdPredict(predict, std::cout, std::cerr);
  if (*cmd_compare) return CmdCompare(compare, std::cout, std::cerr);
  if (*cmd_synth) return CmdSynth(synth, std::cout, std::cerr);
  return 2;
}
