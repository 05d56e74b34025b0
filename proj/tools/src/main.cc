// Copyright 2026 The claimseq Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <deque>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "claimseq/error.h"
#include "commands.h"

namespace {

using claimseq::cli::GlobalOptions;

// Options whose values reach the command only when given explicitly, so
// that config-file values are not shadowed by flag defaults.
class FlagSet {
 public:
  explicit FlagSet(CLI::App* app) : app_(app) {}

  template <typename T>
  void add(const std::string& flag, const std::string& key, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app_->add_option(flag, *value, help);
    collectors_.push_back([opt, value, key](nlohmann::json& j) {
      if (opt->count() > 0) j[key] = *value;
    });
  }

  void add_switch(const std::string& flag, const std::string& key, const std::string& help) {
    CLI::Option* opt = app_->add_flag(flag, help);
    collectors_.push_back([opt, key](nlohmann::json& j) {
      if (opt->count() > 0) j[key] = true;
    });
  }

  nlohmann::json collect() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& c : collectors_) c(j);
    return j;
  }

  CLI::App* app() const { return app_; }

 private:
  CLI::App* app_;
  std::vector<std::function<void(nlohmann::json&)>> collectors_;
};

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

int run(int argc, char** argv) {
  CLI::App app{"Anomaly detection for coded event sequences"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 7;
  std::string profile = "desk";
  std::string out_dir = ".";
  std::string config_path;
  bool quiet = false;
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--profile", profile, "Hyperparameter profile: desk|paper");
  app.add_option("--out-dir", out_dir, "Directory for outputs");
  app.add_option("--config", config_path, "JSON config file with per-command sections");
  app.add_flag("-q,--quiet", quiet, "Suppress progress messages");

  FlagSet gen(app.add_subcommand("gen", "Generate a synthetic claims dataset"));
  gen.add<int>("--patients", "patients", "Number of patients");
  gen.add<int>("--treatments", "treatments", "Treatment dictionary size");
  gen.add<int>("--treatment-types", "treatment_types", "Treatment type dictionary size");
  gen.add<int>("--cost-types", "cost_types", "Cost type dictionary size");
  gen.add<int>("--benefit-types", "benefit_types", "Benefit type dictionary size");
  gen.add<double>("--mean-length", "mean_length", "Mean visits per patient");
  gen.add<int>("--min-length", "min_length", "Minimum visits per patient");
  gen.add<int>("--max-length", "max_length", "Maximum visits per patient");
  gen.add<double>("--fraud-rate", "fraud_rate", "Fraction of fraud patients");
  gen.add<std::string>("--fraud-kind", "fraud_kind", "substitution|rare_insertion|shuffle");
  gen.add<double>("--fraud-intensity", "fraud_intensity", "Fraction of visits corrupted");
  gen.add<double>("--zipf", "zipf", "Zipf exponent of token popularity");
  gen.add_switch("--paper-shaped", "paper_shaped", "Use the 2204-treatment dictionary");
  gen.add<std::string>("--output", "output", "Dataset CSV name");

  auto* train_app = app.add_subcommand("train", "Train a sequence model");
  std::string train_kind;
  train_app->add_option("model", train_kind, "lstm|autoencoder")->required();
  FlagSet train(train_app);
  train.add<std::string>("--data", "data", "Dataset CSV");
  train.add<std::string>("--target", "target", "Target channel: treatment|treatment_type");
  train.add<int>("--epochs", "epochs", "Training epochs");
  train.add<int>("--batch-size", "batch_size", "Batch size");
  train.add<double>("--lr", "lr", "Base learning rate");
  train.add<double>("--clip-norm", "clip_norm", "Gradient norm clip");
  train.add<int>("--hidden", "hidden", "LSTM hidden size");
  train.add<int>("--embed", "embed", "Target embedding size");
  train.add<std::string>("--split", "split", "Split fractions train,validation,test");
  train.add<std::string>("--output", "output", "Checkpoint file name");

  FlagSet score(app.add_subcommand("score", "Score patients with a trained model"));
  score.add<std::string>("--checkpoint", "checkpoint", "Model checkpoint");
  score.add<std::string>("--data", "data", "Dataset CSV");
  score.add<std::string>("--pool", "pool", "sum|max|mean");
  score.add<std::string>("--errors", "errors", "vector|matrix");
  score.add<std::string>("--edf", "edf", "on|off");
  score.add_switch("--all-variants", "all_variants", "Score every default variant");
  score.add<std::string>("--subset", "subset", "train|validation|test|all");
  score.add<double>("--target-recall", "target_recall", "Recall the threshold is set for");
  score.add<double>("--threshold", "threshold", "Fixed flag threshold");
  score.add<std::string>("--output", "output", "Scores CSV name");

  FlagSet eval(app.add_subcommand("eval", "Evaluate score files against labels"));
  eval.add<std::vector<std::string>>("--scores", "scores", "Score CSV, optionally label=path");
  eval.add<std::string>("--data", "data", "Dataset CSV holding the labels");
  eval.add<double>("--target-recall", "target_recall", "Recall for the precision metric");
  eval.add_switch("--sweep", "sweep", "Emit the variant grid table");
  eval.add<std::string>("--baseline", "baseline", "Baseline report to merge");
  eval.add_switch("--plot", "plot", "Write SVG curve plots");
  eval.add<std::string>("--output", "output", "Report file name");

  FlagSet base(app.add_subcommand("baseline", "Skip-gram + isolation forest baseline"));
  base.add<std::string>("--data", "data", "Dataset CSV");
  base.add<std::string>("--channel", "channel", "treatment|treatment_type|both");
  base.add<double>("--contamination", "contamination", "Fraction of patients flagged");
  base.add<int>("--embed", "embed", "Token embedding size");
  base.add<int>("--window", "window", "Skip-gram window");
  base.add<int>("--negatives", "negatives", "Negative samples per pair");
  base.add<int>("--sg-epochs", "sg_epochs", "Skip-gram epochs");
  base.add<int>("--trees", "trees", "Isolation trees");
  base.add<int>("--subsample", "subsample", "Points per tree");
  base.add<std::string>("--split", "split", "Split fractions train,validation,test");
  base.add<std::string>("--output", "output", "Report file name");

  FlagSet sweep(app.add_subcommand("sweep", "Train, score every variant, evaluate, compare"));
  sweep.add<std::string>("--data", "data", "Dataset CSV");
  sweep.add<std::string>("--models", "models", "Comma-separated: lstm,autoencoder");
  sweep.add<std::string>("--target", "target", "Target channel");
  sweep.add<int>("--epochs", "epochs", "Training epochs for every model");
  sweep.add<int>("--hidden", "hidden", "Hidden size for every model");
  sweep.add<std::string>("--split", "split", "Split fractions train,validation,test");
  sweep.add<double>("--target-recall", "target_recall", "Recall for threshold calibration");
  sweep.add<double>("--contamination", "contamination", "Baseline contamination");
  sweep.add_switch("--plot", "plot", "Write SVG curve plots");
  sweep.add<std::string>("--output", "output", "Report file name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(claimseq::ExitCode::kConfig);
  }

  GlobalOptions g;
  g.seed = seed;
  g.profile = claimseq::models::parse_profile(profile);
  g.out_dir = out_dir;
  g.argv.assign(argv, argv + argc);
  if (!config_path.empty()) g.config = claimseq::cli::load_config_file(config_path);
  if (!quiet) g.log = [](const std::string& m) { std::cerr << m << '\n'; };

  namespace cli = claimseq::cli;
  if (gen.app()->parsed()) {
    const auto r = cli::run_gen(g, cli::resolve_gen(g, gen.collect()));
    print_warnings(r.warnings);
    std::cout
        << r.summary.to_json(claimseq::seqdata::load_dataset(r.dataset_path).dictionaries).dump(2)
        << '\n';
  } else if (train_app->parsed()) {
    const auto opts =
        cli::resolve_train(g, claimseq::models::parse_model_kind(train_kind), train.collect());
    const auto r = cli::run_train(g, opts);
    std::cout << "checkpoint: " << r.checkpoint_path << "\nloss log: " << r.loss_path << '\n';
  } else if (score.app()->parsed()) {
    const auto r = cli::run_score(g, cli::resolve_score(g, score.collect()));
    print_warnings(r.warnings);
    for (const auto& [variant, c] : r.calibrations) {
      std::cout << variant << ": threshold " << c.threshold << ", recall " << c.achieved_recall
                << ", precision " << c.achieved_precision << '\n';
    }
    std::cout << "scores: " << r.scores_path << '\n';
  } else if (eval.app()->parsed()) {
    const auto r = cli::run_eval(g, cli::resolve_eval(g, eval.collect()));
    std::cout << r.report.dump(2) << '\n';
  } else if (base.app()->parsed()) {
    const auto r = cli::run_baseline_cmd(g, cli::resolve_baseline(g, base.collect()));
    std::cout << r.report.dump(2) << '\n';
  } else if (sweep.app()->parsed()) {
    const auto r = cli::run_sweep(g, cli::resolve_sweep(g, sweep.collect()));
    print_warnings(r.warnings);
    std::cout << r.report.at("best").dump(2) << '\n';
    if (r.baseline_roc_auc) std::cout << "isolation forest roc_auc " << *r.baseline_roc_auc << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const claimseq::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(claimseq::ExitCode::kFailure);
  }
}
