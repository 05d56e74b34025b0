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

// Pipeline commands behind the claimseq executable. Each command resolves
// its options from defaults, the --config file section and explicit flags
// (in that order), writes its outputs under the output directory and
// records a manifest.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "claimseq/baseline.h"
#include "claimseq/datagen.h"
#include "claimseq/eval.h"
#include "claimseq/models.h"
#include "claimseq/scoring.h"
#include "claimseq/seqdata.h"

namespace claimseq::cli {

struct GlobalOptions {
  std::uint64_t seed = 7;
  models::Profile profile = models::Profile::kDesk;
  std::string out_dir = ".";
  // Parsed --config file; sections are keyed by command name.
  nlohmann::json config = nlohmann::json::object();
  // Command line as typed, recorded in manifests.
  std::vector<std::string> argv;
  // Progress messages; silent when unset.
  std::function<void(const std::string&)> log;
};

// Reads a JSON config file; throws IoError or ConfigError.
nlohmann::json load_config_file(const std::string& path);

// Parses "a,b,c" split fractions; throws ConfigError.
seqdata::SplitFractions parse_split(const std::string& text);
nlohmann::json split_to_json(const seqdata::SplitFractions& f);
seqdata::SplitFractions split_from_json(const nlohmann::json& j);

struct GenOptions {
  datagen::GenConfig config;
  std::string output = "dataset.csv";
};
// `flags` holds explicitly given options: patients, treatments,
// treatment_types, cost_types, benefit_types, mean_length, min_length,
// max_length, fraud_rate, fraud_kind, fraud_intensity, zipf, paper_shaped,
// output.
GenOptions resolve_gen(const GlobalOptions& g, const nlohmann::json& flags);

struct GenResult {
  std::string dataset_path;
  std::string sidecar_path;
  datagen::DatasetSummary summary;
  std::vector<std::string> warnings;
};
GenResult run_gen(const GlobalOptions& g, const GenOptions& opts);

struct TrainOptions {
  std::string data_path;
  models::ModelConfig model;
  seqdata::SplitFractions split;
  std::string output;  // checkpoint path; defaults to <kind>.checkpoint.json
};
// flags: data, target, epochs, batch_size, lr, hidden, embed, split,
// output, plus a "model" object merged into the model config.
TrainOptions resolve_train(const GlobalOptions& g, models::ModelKind kind,
                           const nlohmann::json& flags);

struct TrainRunResult {
  std::string checkpoint_path;
  std::string loss_path;
  models::TrainResult train;
};
TrainRunResult run_train(const GlobalOptions& g, const TrainOptions& opts);

struct ScoreOptions {
  std::string checkpoint_path;
  std::string data_path;
  std::vector<scoring::Variant> variants;
  seqdata::SplitTag subset = seqdata::SplitTag::kTest;
  double target_recall = 0.8;
  std::optional<double> threshold;  // fixed threshold instead of calibration
  std::string output = "scores.csv";
};
// flags: checkpoint, data, pool, errors, edf, all_variants, subset,
// target_recall, threshold, output.
ScoreOptions resolve_score(const GlobalOptions& g, const nlohmann::json& flags);

struct ScoreRunResult {
  std::string scores_path;
  std::vector<std::string> edf_paths;
  std::vector<scoring::ScoreSet> sets;
  std::map<std::string, scoring::ThresholdCalibration> calibrations;
  std::vector<std::string> warnings;
};
ScoreRunResult run_score(const GlobalOptions& g, const ScoreOptions& opts);

struct EvalOptions {
  // (label, path); a non-empty label prefixes the variant keys.
  std::vector<std::pair<std::string, std::string>> scores;
  std::string data_path;
  double target_recall = 0.8;
  bool sweep = false;
  std::optional<std::string> baseline_report;
  bool plot = false;
  std::string output = "report.json";
};
// flags: scores (array of "[label=]path"), data, target_recall, sweep,
// baseline, plot, output.
EvalOptions resolve_eval(const GlobalOptions& g, const nlohmann::json& flags);

struct EvalRunResult {
  std::string report_path;
  nlohmann::json report;
};
EvalRunResult run_eval(const GlobalOptions& g, const EvalOptions& opts);

struct BaselineOptions {
  std::string data_path;
  std::vector<seqdata::Channel> channels;
  baseline::BaselineConfig config;
  seqdata::SplitFractions split;
  std::string output = "baseline.json";
};
// flags: data, channel (treatment|treatment_type|both), contamination,
// embed, window, negatives, sg_epochs, trees, subsample, split, output.
BaselineOptions resolve_baseline(const GlobalOptions& g, const nlohmann::json& flags);

struct BaselineRunResult {
  std::string report_path;
  nlohmann::json report;
  std::vector<baseline::BaselineResult> results;
};
BaselineRunResult run_baseline_cmd(const GlobalOptions& g, const BaselineOptions& opts);

struct SweepOptions {
  std::string data_path;
  std::vector<models::ModelKind> kinds{models::ModelKind::kLstm, models::ModelKind::kAutoencoder};
  seqdata::Channel target = seqdata::Channel::kTreatment;
  std::optional<int> epochs;
  std::optional<int> hidden;
  seqdata::SplitFractions split;
  double target_recall = 0.8;
  baseline::BaselineConfig baseline;
  bool plot = false;
  std::string output = "sweep.json";
};
// flags: data, models, target, epochs, hidden, split, target_recall,
// contamination, plot, output.
SweepOptions resolve_sweep(const GlobalOptions& g, const nlohmann::json& flags);

struct ModelSweep {
  models::ModelKind kind = models::ModelKind::kLstm;
  std::map<std::string, double> validation_roc_auc;  // by variant name
  std::map<std::string, eval::VariantReport> test;   // by variant name
  std::string best_variant;                          // by validation ROC AUC
  double train_seconds = 0.0;
};

struct SweepRunResult {
  std::string report_path;
  nlohmann::json report;
  std::vector<ModelSweep> models;
  std::optional<double> baseline_roc_auc;
  std::vector<std::string> warnings;
};
SweepRunResult run_sweep(const GlobalOptions& g, const SweepOptions& opts);

// Writes manifest-<command>.json into the output directory.
void write_manifest(const GlobalOptions& g, const std::string& command,
                    const nlohmann::json& resolved, const std::vector<std::string>& outputs);

}  // namespace claimseq::cli
