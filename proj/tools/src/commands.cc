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

#include "commands.h"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "claimseq/error.h"

#ifndef CLAIMSEQ_VERSION
#define CLAIMSEQ_VERSION "unknown"
#endif

namespace claimseq::cli {

namespace fs = std::filesystem;

namespace {

// Config-file section for `command` with explicit flags layered on top.
nlohmann::json layered(const GlobalOptions& g, const std::string& command,
                       const nlohmann::json& flags) {
  nlohmann::json j = nlohmann::json::object();
  if (g.config.contains(command)) {
    if (!g.config.at(command).is_object()) {
      throw ConfigError("config section '" + command + "' must be an object");
    }
    j = g.config.at(command);
  }
  if (!flags.is_null()) j.merge_patch(flags);
  return j;
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("option '") + key + "' has the wrong type");
  }
}

std::string require_path(const nlohmann::json& j, const char* key, const std::string& command) {
  const auto value = get_or<std::string>(j, key, "");
  if (value.empty()) throw ConfigError(command + ": missing required option --" + key);
  return value;
}

std::string out_path(const GlobalOptions& g, const std::string& name) {
  const fs::path p(name);
  if (p.is_absolute()) return p.string();
  return (fs::path(g.out_dir) / p).string();
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw IoError("cannot create directory '" + parent.string() + "': " + ec.message());
}

void write_file(const std::string& path, const std::string& content) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << content;
  if (!out) throw IoError("write failed for '" + path + "'");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string dump(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::string file_safe(std::string key) {
  for (char& c : key) {
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  }
  return key;
}

const seqdata::Dataset& subset_of(const seqdata::DatasetSplits& s, const seqdata::Dataset& all,
                                  seqdata::SplitTag tag) {
  switch (tag) {
    case seqdata::SplitTag::kTrain:
      return s.train;
    case seqdata::SplitTag::kValidation:
      return s.validation;
    case seqdata::SplitTag::kTest:
      return s.test;
    case seqdata::SplitTag::kAll:
      return all;
  }
  return all;
}

seqdata::SplitTag parse_subset(const std::string& name) {
  if (name == "train") return seqdata::SplitTag::kTrain;
  if (name == "validation") return seqdata::SplitTag::kValidation;
  if (name == "test") return seqdata::SplitTag::kTest;
  if (name == "all") return seqdata::SplitTag::kAll;
  throw ConfigError("unknown subset '" + name + "' (expected train|validation|test|all)");
}

std::vector<bool> labels_of(const seqdata::Dataset& ds) {
  std::vector<bool> labels;
  for (const auto& s : ds.sequences) {
    if (!s.fraud_label) throw DataError("patient '" + s.patient_id + "' has no fraud label");
    labels.push_back(*s.fraud_label);
  }
  return labels;
}

std::vector<int> lengths_of(const seqdata::Dataset& ds) {
  std::vector<int> lengths;
  for (const auto& s : ds.sequences) lengths.push_back(s.length());
  return lengths;
}

bool has_both_classes(const std::vector<bool>& labels) {
  const auto pos = std::count(labels.begin(), labels.end(), true);
  return pos > 0 && static_cast<std::size_t>(pos) < labels.size();
}

void note(const GlobalOptions& g, const std::string& message) {
  if (g.log) g.log(message);
}

models::EpochCallback epoch_logger(const GlobalOptions& g, const std::string& name) {
  return [&g, name](const models::EpochReport& e) {
    note(g, name + " epoch " + std::to_string(e.epoch + 1) + ": loss " +
                scoring::format_double(e.mean_loss) + ", lr " +
                scoring::format_double(e.learning_rate));
  };
}

std::string timestamp_utc() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

nlohmann::json load_config_file(const std::string& path) {
  const std::string text = read_file(path);
  try {
    auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw ConfigError("config file '" + path + "' must hold a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

seqdata::SplitFractions parse_split(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad split fraction '" + item + "'");
    }
  }
  if (parts.size() != 3) throw ConfigError("split needs three fractions train,validation,test");
  return {parts[0], parts[1], parts[2]};
}

nlohmann::json split_to_json(const seqdata::SplitFractions& f) {
  return nlohmann::json::array({f.train, f.validation, f.test});
}

seqdata::SplitFractions split_from_json(const nlohmann::json& j) {
  if (j.is_string()) return parse_split(j.get<std::string>());
  if (!j.is_array() || j.size() != 3) throw ConfigError("split must be [train, validation, test]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

namespace {

seqdata::SplitFractions split_option(const nlohmann::json& j) {
  return j.contains("split") ? split_from_json(j.at("split")) : seqdata::SplitFractions{};
}

}  // namespace

void write_manifest(const GlobalOptions& g, const std::string& command,
                    const nlohmann::json& resolved, const std::vector<std::string>& outputs) {
  nlohmann::json m = {
      {"command", command},
      {"argv", g.argv},
      {"seed", g.seed},
      {"profile", std::string(models::profile_name(g.profile))},
      {"resolved", resolved},
      {"outputs", outputs},
      {"versions",
       {{"claimseq", CLAIMSEQ_VERSION},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
        {"compiler", __VERSION__}}},
      {"created_at", timestamp_utc()},
  };
  write_file(out_path(g, "manifest-" + command + ".json"), dump(m));
}

// gen ---------------------------------------------------------------------

GenOptions resolve_gen(const GlobalOptions& g, const nlohmann::json& flags) {
  const auto j = layered(g, "gen", flags);
  GenOptions o;
  const bool paper_shaped = get_or(j, "paper_shaped", g.profile == models::Profile::kPaper);
  datagen::GenConfig& c = o.config;
  if (paper_shaped) c = datagen::GenConfig::paper_shaped();
  c.seed = g.seed;
  c.num_patients = get_or(j, "patients", c.num_patients);
  c.dict_sizes.treatment = get_or(j, "treatments", c.dict_sizes.treatment);
  c.dict_sizes.treatment_type = get_or(j, "treatment_types", c.dict_sizes.treatment_type);
  c.dict_sizes.cost_type = get_or(j, "cost_types", c.dict_sizes.cost_type);
  c.dict_sizes.benefit_type = get_or(j, "benefit_types", c.dict_sizes.benefit_type);
  c.mean_length = get_or(j, "mean_length", c.mean_length);
  c.min_length = get_or(j, "min_length", c.min_length);
  c.max_length = get_or(j, "max_length", c.max_length);
  c.fraud_rate = get_or(j, "fraud_rate", c.fraud_rate);
  c.fraud_kind = datagen::parse_fraud_kind(
      get_or<std::string>(j, "fraud_kind", std::string(datagen::fraud_kind_name(c.fraud_kind))));
  c.fraud_intensity = get_or(j, "fraud_intensity", c.fraud_intensity);
  c.zipf_exponent = get_or(j, "zipf", c.zipf_exponent);
  o.output = get_or<std::string>(j, "output", o.output);
  c.validate();
  return o;
}

GenResult run_gen(const GlobalOptions& g, const GenOptions& opts) {
  const datagen::GeneratedData data = datagen::gen_dataset(opts.config);
  GenResult r;
  r.dataset_path = out_path(g, opts.output);
  r.sidecar_path = (fs::path(r.dataset_path).parent_path() /
                    (fs::path(r.dataset_path).stem().string() + ".generator.json"))
                       .string();
  ensure_parent(r.dataset_path);
  seqdata::save_dataset(r.dataset_path, data.dataset);
  write_file(r.sidecar_path, dump(datagen::sidecar_json(opts.config, data)));
  r.summary = datagen::describe_dataset(data.dataset);
  r.warnings = data.warnings;
  nlohmann::json resolved = datagen::gen_config_to_json(opts.config);
  resolved["output"] = opts.output;
  write_manifest(g, "gen", resolved, {r.dataset_path, r.sidecar_path});
  return r;
}

// train -------------------------------------------------------------------

TrainOptions resolve_train(const GlobalOptions& g, models::ModelKind kind,
                           const nlohmann::json& flags) {
  const auto j = layered(g, "train", flags);
  TrainOptions o;
  o.data_path = require_path(j, "data", "train");
  const auto target = seqdata::parse_channel(get_or<std::string>(j, "target", "treatment"));
  models::ModelConfig base = models::default_config(kind, g.profile, target);
  models::training_config(base).seed = g.seed;
  nlohmann::json patch = j.value("model", nlohmann::json::object());
  if (!patch.is_object()) throw ConfigError("train: 'model' must be an object");
  nlohmann::json training = patch.value("training", nlohmann::json::object());
  if (j.contains("epochs")) training["epochs"] = j.at("epochs");
  if (j.contains("batch_size")) training["batch_size"] = j.at("batch_size");
  if (j.contains("lr")) training["base_lr"] = j.at("lr");
  if (j.contains("clip_norm")) training["clip_norm"] = j.at("clip_norm");
  patch["training"] = training;
  if (j.contains("hidden")) patch["hidden_size"] = j.at("hidden");
  if (j.contains("embed")) {
    patch[kind == models::ModelKind::kLstm ? "target_embed" : "embed_size"] = j.at("embed");
  }
  o.model = models::config_from_json(patch, base);
  models::training_config(o.model).validate();
  o.split = split_option(j);
  o.output = get_or<std::string>(j, "output",
                                 std::string(models::model_kind_name(kind)) + ".checkpoint.json");
  return o;
}

TrainRunResult run_train(const GlobalOptions& g, const TrainOptions& opts) {
  const seqdata::Dataset ds = seqdata::load_dataset(opts.data_path);
  const auto splits = seqdata::split_dataset(ds, opts.split, g.seed);
  const auto target = models::config_target(opts.model);
  auto model = models::make_model(opts.model, models::InputShape::from(ds, target));
  TrainRunResult r;
  r.train = models::train(*model, splits.train,
                          epoch_logger(g, std::string(models::model_kind_name(model->kind()))));
  r.checkpoint_path = out_path(g, opts.output);
  const fs::path ck(r.checkpoint_path);
  std::string stem = ck.filename().string();
  const auto dot = stem.find(".checkpoint");
  stem = stem.substr(0, dot == std::string::npos ? stem.find('.') : dot);
  r.loss_path = (ck.parent_path() / (stem + ".loss.csv")).string();

  const nlohmann::json metadata = {{"split", split_to_json(opts.split)},
                                   {"split_seed", g.seed},
                                   {"train_patients", splits.train.size()}};
  ensure_parent(r.checkpoint_path);
  models::save_checkpoint(r.checkpoint_path, *model, ds.dictionaries, metadata);
  std::ostringstream loss;
  loss << "epoch,learning_rate,mean_loss\n";
  for (const auto& e : r.train.epochs) {
    loss << e.epoch << ',' << scoring::format_double(e.learning_rate) << ','
         << scoring::format_double(e.mean_loss) << '\n';
  }
  write_file(r.loss_path, loss.str());
  nlohmann::json resolved = {{"data", opts.data_path},
                             {"model", models::config_to_json(opts.model)},
                             {"split", split_to_json(opts.split)},
                             {"output", opts.output}};
  write_manifest(g, "train", resolved, {r.checkpoint_path, r.loss_path});
  return r;
}

// score -------------------------------------------------------------------

ScoreOptions resolve_score(const GlobalOptions& g, const nlohmann::json& flags) {
  const auto j = layered(g, "score", flags);
  ScoreOptions o;
  o.checkpoint_path = require_path(j, "checkpoint", "score");
  o.data_path = require_path(j, "data", "score");
  if (get_or(j, "all_variants", false)) {
    o.variants = scoring::default_variants();
  } else {
    scoring::Variant v;
    v.pooling = scoring::parse_pooling(get_or<std::string>(j, "pool", "sum"));
    v.shape = scoring::parse_shape(get_or<std::string>(j, "errors", "vector"));
    v.normalization = scoring::parse_normalization(get_or<std::string>(j, "edf", "off"));
    o.variants = {v};
  }
  o.subset = parse_subset(get_or<std::string>(j, "subset", "test"));
  o.target_recall = get_or(j, "target_recall", o.target_recall);
  if (!(o.target_recall > 0.0 && o.target_recall <= 1.0)) {
    throw ConfigError("target recall must lie in (0, 1]");
  }
  if (j.contains("threshold")) o.threshold = get_or(j, "threshold", 0.0);
  o.output = get_or<std::string>(j, "output", o.output);
  return o;
}

ScoreRunResult run_score(const GlobalOptions& g, const ScoreOptions& opts) {
  const models::Checkpoint ck = models::load_checkpoint(opts.checkpoint_path);
  seqdata::LoadOptions load;
  load.frozen_dictionaries = ck.dictionaries;
  const seqdata::Dataset ds = seqdata::load_dataset(opts.data_path, load);
  const auto split = ck.metadata.contains("split") ? split_from_json(ck.metadata.at("split"))
                                                   : seqdata::SplitFractions{};
  const auto split_seed = ck.metadata.value("split_seed", g.seed);
  const auto splits = seqdata::split_dataset(ds, split, split_seed);
  const seqdata::Dataset& scored = subset_of(splits, ds, opts.subset);
  if (scored.empty()) throw EmptyInputError("the selected subset is empty");
  const auto channel = ck.model->target_channel();

  ScoreRunResult r;
  std::optional<scoring::EdfTables> tables;
  const bool needs_edf = std::any_of(
      opts.variants.begin(), opts.variants.end(),
      [](const scoring::Variant& v) { return v.normalization == scoring::Normalization::kEdf; });
  if (needs_edf) {
    if (splits.validation.empty()) {
      throw ConfigError("--edf on needs a validation split; the checkpoint's split has none");
    }
    const auto val_probs = ck.model->predict(splits.validation.sequences);
    const auto val_errors =
        scoring::compute_errors(val_probs, splits.validation.sequences, channel);
    tables = scoring::build_edf_tables(val_errors);
    for (const auto shape : {scoring::ErrorShape::kVector, scoring::ErrorShape::kMatrix}) {
      const bool used =
          std::any_of(opts.variants.begin(), opts.variants.end(), [&](const scoring::Variant& v) {
            return v.normalization == scoring::Normalization::kEdf && v.shape == shape;
          });
      if (!used) continue;
      const std::string path =
          out_path(g, "edf_" + std::string(scoring::shape_name(shape)) + ".json");
      write_file(path, dump(tables->get(shape).to_json()));
      r.edf_paths.push_back(path);
    }
  }

  const auto probs = ck.model->predict(scored.sequences);
  const auto errors = scoring::compute_errors(probs, scored.sequences, channel);
  std::optional<std::vector<bool>> labels;
  if (scored.has_labels()) labels = labels_of(scored);
  const bool can_calibrate =
      labels && std::find(labels->begin(), labels->end(), true) != labels->end();

  std::ostringstream csv;
  csv << scoring::kScoreCsvHeader << '\n';
  nlohmann::json calibrations = nlohmann::json::object();
  for (const auto& v : opts.variants) {
    scoring::ScoreSet set =
        scoring::score_variant(errors, scored.sequences, v, tables ? &*tables : nullptr);
    std::optional<double> threshold = opts.threshold;
    if (!threshold && can_calibrate) {
      const auto c = scoring::calibrate_threshold(set.scores, *labels, opts.target_recall);
      r.calibrations[v.name()] = c;
      threshold = c.threshold;
      calibrations[v.name()] = {{"threshold", c.threshold},
                                {"recall", c.achieved_recall},
                                {"precision", c.achieved_precision}};
    }
    if (!set.fallback_classes.empty()) {
      r.warnings.push_back(v.name() + ": " + std::to_string(set.fallback_classes.size()) +
                           " classes have no validation errors; pooled EDF used");
    }
    scoring::write_scores(csv, set, threshold, false);
    r.sets.push_back(std::move(set));
  }
  if (!opts.threshold && !can_calibrate) {
    r.warnings.push_back("no fraud labels in the scored subset; flagged column left empty");
  }
  r.scores_path = out_path(g, opts.output);
  write_file(r.scores_path, csv.str());

  nlohmann::json variants = nlohmann::json::array();
  for (const auto& v : opts.variants) variants.push_back(v.name());
  nlohmann::json resolved = {{"checkpoint", opts.checkpoint_path},
                             {"data", opts.data_path},
                             {"variants", variants},
                             {"subset", std::string(seqdata::split_name(opts.subset))},
                             {"target_recall", opts.target_recall},
                             {"calibration", calibrations},
                             {"output", opts.output}};
  if (opts.threshold) resolved["threshold"] = *opts.threshold;
  std::vector<std::string> outputs{r.scores_path};
  outputs.insert(outputs.end(), r.edf_paths.begin(), r.edf_paths.end());
  write_manifest(g, "score", resolved, outputs);
  return r;
}

// eval --------------------------------------------------------------------

EvalOptions resolve_eval(const GlobalOptions& g, const nlohmann::json& flags) {
  const auto j = layered(g, "eval", flags);
  EvalOptions o;
  const auto specs = get_or<std::vector<std::string>>(j, "scores", {});
  if (specs.empty()) throw ConfigError("eval: missing required option --scores");
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      o.scores.emplace_back("", s);
    } else {
      o.scores.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
  }
  o.data_path = require_path(j, "data", "eval");
  o.target_recall = get_or(j, "target_recall", o.target_recall);
  if (!(o.target_recall > 0.0 && o.target_recall <= 1.0)) {
    throw ConfigError("target recall must lie in (0, 1]");
  }
  o.sweep = get_or(j, "sweep", false);
  const auto baseline = get_or<std::string>(j, "baseline", "");
  if (!baseline.empty()) o.baseline_report = baseline;
  o.plot = get_or(j, "plot", false);
  o.output = get_or<std::string>(j, "output", o.output);
  return o;
}

namespace {

struct LabelInfo {
  bool label = false;
  int length = 0;
};

void write_variant_artifacts(const GlobalOptions& g, const std::string& key,
                             std::span<const eval::Prediction> preds,
                             const eval::VariantReport& report, std::vector<std::string>& outputs,
                             std::vector<eval::NamedCurve>* roc,
                             std::vector<eval::NamedCurve>* pr) {
  const std::string base = file_safe(key);
  const auto roc_points = eval::curve(preds, eval::CurveKind::kRoc);
  const auto pr_points = eval::curve(preds, eval::CurveKind::kPr);
  std::ostringstream roc_csv, pr_csv, length_csv;
  eval::write_curve_csv(roc_csv, roc_points, eval::CurveKind::kRoc);
  eval::write_curve_csv(pr_csv, pr_points, eval::CurveKind::kPr);
  eval::write_length_csv(length_csv, report.by_length);
  for (const auto& [name, text] : {std::pair{"curves/" + base + ".roc.csv", roc_csv.str()},
                                   std::pair{"curves/" + base + ".pr.csv", pr_csv.str()},
                                   std::pair{"by_length/" + base + ".csv", length_csv.str()}}) {
    const std::string path = out_path(g, name);
    write_file(path, text);
    outputs.push_back(path);
  }
  if (roc) roc->push_back({key, roc_points});
  if (pr) pr->push_back({key, pr_points});
}

void write_plots(const GlobalOptions& g, const std::vector<eval::NamedCurve>& roc,
                 const std::vector<eval::NamedCurve>& pr, std::vector<std::string>& outputs) {
  std::ostringstream roc_svg, pr_svg;
  eval::write_curve_svg(roc_svg, roc, eval::CurveKind::kRoc);
  eval::write_curve_svg(pr_svg, pr, eval::CurveKind::kPr);
  for (const auto& [name, text] : {std::pair{std::string("roc.svg"), roc_svg.str()},
                                   std::pair{std::string("pr.svg"), pr_svg.str()}}) {
    const std::string path = out_path(g, name);
    write_file(path, text);
    outputs.push_back(path);
  }
}

std::string sweep_csv_header(double target_recall) {
  return "key,roc_auc,pr_auc," + eval::precision_key(target_recall) + ",threshold\n";
}

}  // namespace

EvalRunResult run_eval(const GlobalOptions& g, const EvalOptions& opts) {
  const seqdata::Dataset ds = seqdata::load_dataset(opts.data_path);
  std::map<std::string, LabelInfo> info;
  for (const auto& s : ds.sequences) {
    if (!s.fraud_label) continue;
    info[s.patient_id] = {*s.fraud_label, s.length()};
  }

  EvalRunResult r;
  r.report = nlohmann::json::object();
  std::vector<std::string> outputs;
  std::vector<eval::NamedCurve> roc_curves, pr_curves;
  std::ostringstream sweep_csv;
  sweep_csv << sweep_csv_header(opts.target_recall);
  nlohmann::json sweep = nlohmann::json::array();

  for (const auto& [label, path] : opts.scores) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open scores '" + path + "'");
    const auto rows = scoring::read_scores(in);
    std::vector<std::string> order;
    std::map<std::string, std::vector<eval::Prediction>> groups;
    for (const auto& row : rows) {
      const auto it = info.find(row.patient_id);
      if (it == info.end()) {
        throw DataError("no fraud label for patient '" + row.patient_id + "' in " + opts.data_path);
      }
      if (!groups.count(row.variant)) order.push_back(row.variant);
      groups[row.variant].push_back({row.score, it->second.label, it->second.length});
    }
    for (const auto& variant : order) {
      const std::string key = label.empty() ? variant : label + "/" + variant;
      if (r.report.contains(key))
        throw ConfigError("duplicate variant '" + key + "' in eval input");
      const auto& preds = groups[variant];
      const eval::VariantReport rep = eval::evaluate(preds, opts.target_recall);
      r.report[key] = eval::report_to_json(rep);
      write_variant_artifacts(g, key, preds, rep, outputs, opts.plot ? &roc_curves : nullptr,
                              opts.plot ? &pr_curves : nullptr);
      sweep_csv << key << ',' << scoring::format_double(rep.roc_auc) << ','
                << scoring::format_double(rep.pr_auc) << ','
                << scoring::format_double(rep.calibration.achieved_precision) << ','
                << scoring::format_double(rep.calibration.threshold) << '\n';
      sweep.push_back(key);
    }
  }
  if (opts.baseline_report) {
    try {
      r.report["isolation_forest"] = nlohmann::json::parse(read_file(*opts.baseline_report));
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError("baseline report '" + *opts.baseline_report + "': " + e.what());
    }
  }
  if (opts.sweep) {
    r.report["sweep"] = sweep;
    const std::string path = out_path(g, "sweep.csv");
    write_file(path, sweep_csv.str());
    outputs.push_back(path);
  }
  if (opts.plot) write_plots(g, roc_curves, pr_curves, outputs);
  r.report_path = out_path(g, opts.output);
  write_file(r.report_path, dump(r.report));
  outputs.insert(outputs.begin(), r.report_path);

  nlohmann::json scores = nlohmann::json::array();
  for (const auto& [label, path] : opts.scores) {
    scores.push_back(label.empty() ? path : label + "=" + path);
  }
  write_manifest(g, "eval",
                 {{"scores", scores},
                  {"data", opts.data_path},
                  {"target_recall", opts.target_recall},
                  {"sweep", opts.sweep},
                  {"baseline", opts.baseline_report.value_or("")},
                  {"plot", opts.plot},
                  {"output", opts.output}},
                 outputs);
  return r;
}

// baseline ----------------------------------------------------------------

namespace {

baseline::BaselineConfig baseline_config(const GlobalOptions& g, const nlohmann::json& j) {
  baseline::BaselineConfig c;
  c.contamination = get_or(j, "contamination", c.contamination);
  c.skipgram.embed_size = get_or(j, "embed", c.skipgram.embed_size);
  c.skipgram.window = get_or(j, "window", c.skipgram.window);
  c.skipgram.negative_samples = get_or(j, "negatives", c.skipgram.negative_samples);
  c.skipgram.epochs = get_or(j, "sg_epochs", c.skipgram.epochs);
  c.skipgram.seed = g.seed;
  c.forest.num_trees = get_or(j, "trees", c.forest.num_trees);
  c.forest.subsample_size = get_or(j, "subsample", c.forest.subsample_size);
  c.forest.seed = g.seed;
  if (!(c.contamination > 0.0 && c.contamination < 1.0)) {
    throw ConfigError("contamination must lie in (0, 1)");
  }
  c.skipgram.validate();
  c.forest.validate();
  return c;
}

nlohmann::json baseline_config_json(const baseline::BaselineConfig& c) {
  return {{"contamination", c.contamination}, {"embed", c.skipgram.embed_size},
          {"window", c.skipgram.window},      {"negatives", c.skipgram.negative_samples},
          {"sg_epochs", c.skipgram.epochs},   {"sg_learning_rate", c.skipgram.learning_rate},
          {"trees", c.forest.num_trees},      {"subsample", c.forest.subsample_size}};
}

}  // namespace

BaselineOptions resolve_baseline(const GlobalOptions& g, const nlohmann::json& flags) {
  const auto j = layered(g, "baseline", flags);
  BaselineOptions o;
  o.data_path = require_path(j, "data", "baseline");
  const auto channel = get_or<std::string>(j, "channel", "both");
  if (channel == "both") {
    o.channels = {seqdata::Channel::kTreatment, seqdata::Channel::kTreatmentType};
  } else {
    o.channels = {seqdata::parse_channel(channel)};
  }
  o.config = baseline_config(g, j);
  o.split = split_option(j);
  o.output = get_or<std::string>(j, "output", o.output);
  return o;
}

BaselineRunResult run_baseline_cmd(const GlobalOptions& g, const BaselineOptions& opts) {
  const seqdata::Dataset ds = seqdata::load_dataset(opts.data_path);
  const auto splits = seqdata::split_dataset(ds, opts.split, g.seed);
  BaselineRunResult r;
  r.report = nlohmann::json::object();
  std::ostringstream csv;
  csv << scoring::kScoreCsvHeader << '\n';
  for (const auto channel : opts.channels) {
    baseline::BaselineConfig c = opts.config;
    c.channel = channel;
    auto result = baseline::run_baseline(splits.train, splits.test, c);
    const std::string name(seqdata::channel_name(channel));
    r.report[name] = result.to_json(c.contamination);
    for (std::size_t i = 0; i < result.scores.size(); ++i) {
      csv << result.patient_ids[i] << ',' << scoring::format_double(result.scores[i])
          << ",isolation_forest-" << name << ',' << (result.classification.flags[i] ? 1 : 0)
          << '\n';
    }
    r.results.push_back(std::move(result));
  }
  r.report_path = out_path(g, opts.output);
  write_file(r.report_path, dump(r.report));
  const std::string scores_path = out_path(g, "baseline_scores.csv");
  write_file(scores_path, csv.str());

  nlohmann::json channels = nlohmann::json::array();
  for (const auto c : opts.channels) channels.push_back(std::string(seqdata::channel_name(c)));
  write_manifest(g, "baseline",
                 {{"data", opts.data_path},
                  {"channels", channels},
                  {"config", baseline_config_json(opts.config)},
                  {"split", split_to_json(opts.split)},
                  {"output", opts.output}},
                 {r.report_path, scores_path});
  return r;
}

// sweep -------------------------------------------------------------------

SweepOptions resolve_sweep(const GlobalOptions& g, const nlohmann::json& flags) {
  const auto j = layered(g, "sweep", flags);
  SweepOptions o;
  o.data_path = require_path(j, "data", "sweep");
  if (j.contains("models")) {
    o.kinds.clear();
    std::stringstream ss(get_or<std::string>(j, "models", ""));
    std::string item;
    while (std::getline(ss, item, ',')) o.kinds.push_back(models::parse_model_kind(item));
    if (o.kinds.empty()) throw ConfigError("sweep: --models must name at least one model");
  }
  o.target = seqdata::parse_channel(get_or<std::string>(j, "target", "treatment"));
  if (j.contains("epochs")) o.epochs = get_or(j, "epochs", 0);
  if (j.contains("hidden")) o.hidden = get_or(j, "hidden", 0);
  o.split = split_option(j);
  o.target_recall = get_or(j, "target_recall", o.target_recall);
  if (!(o.target_recall > 0.0 && o.target_recall <= 1.0)) {
    throw ConfigError("target recall must lie in (0, 1]");
  }
  o.baseline = baseline_config(g, j);
  o.baseline.channel = o.target;
  o.plot = get_or(j, "plot", false);
  o.output = get_or<std::string>(j, "output", o.output);
  return o;
}

namespace {

models::ModelConfig sweep_model_config(const GlobalOptions& g, const SweepOptions& o,
                                       models::ModelKind kind) {
  models::ModelConfig c = models::default_config(kind, g.profile, o.target);
  auto& t = models::training_config(c);
  t.seed = g.seed;
  if (o.epochs) t.epochs = *o.epochs;
  if (o.hidden) {
    std::visit([&](auto& m) { m.hidden_size = *o.hidden; }, c);
  }
  t.validate();
  return c;
}

}  // namespace

SweepRunResult run_sweep(const GlobalOptions& g, const SweepOptions& opts) {
  const seqdata::Dataset ds = seqdata::load_dataset(opts.data_path);
  const auto splits = seqdata::split_dataset(ds, opts.split, g.seed);
  if (splits.validation.empty() || splits.test.empty()) {
    throw ConfigError("sweep needs non-empty validation and test splits");
  }
  const auto val_labels = labels_of(splits.validation);
  const auto test_labels = labels_of(splits.test);
  if (!has_both_classes(val_labels) || !has_both_classes(test_labels)) {
    throw DataError("sweep needs fraud and normal patients in both validation and test splits");
  }
  const auto test_lengths = lengths_of(splits.test);

  SweepRunResult r;
  r.report = nlohmann::json::object();
  std::vector<std::string> outputs;
  std::vector<eval::NamedCurve> roc_curves, pr_curves;
  std::ostringstream sweep_csv;
  sweep_csv << "model,variant,validation_roc_auc,roc_auc,pr_auc,"
            << eval::precision_key(opts.target_recall) << ",threshold\n";
  nlohmann::json model_configs = nlohmann::json::object();

  for (const auto kind : opts.kinds) {
    const std::string kind_name(models::model_kind_name(kind));
    const auto config = sweep_model_config(g, opts, kind);
    model_configs[kind_name] = models::config_to_json(config);
    auto model = models::make_model(config, models::InputShape::from(ds, opts.target));
    const auto start = std::chrono::steady_clock::now();
    note(g, "training " + kind_name);
    models::train(*model, splits.train, epoch_logger(g, kind_name));
    ModelSweep ms;
    ms.kind = kind;
    ms.train_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const std::string ck_path = out_path(g, kind_name + ".checkpoint.json");
    ensure_parent(ck_path);
    models::save_checkpoint(ck_path, *model, ds.dictionaries,
                            {{"split", split_to_json(opts.split)}, {"split_seed", g.seed}});
    outputs.push_back(ck_path);

    const auto val_errors = scoring::compute_errors(model->predict(splits.validation.sequences),
                                                    splits.validation.sequences, opts.target);
    const auto test_errors = scoring::compute_errors(model->predict(splits.test.sequences),
                                                     splits.test.sequences, opts.target);
    const scoring::EdfTables tables = scoring::build_edf_tables(val_errors);

    std::ostringstream scores_csv;
    scores_csv << scoring::kScoreCsvHeader << '\n';
    double best_val = -1.0;
    for (const auto& v : scoring::default_variants()) {
      const std::string name = v.name();
      const auto val_set =
          scoring::score_variant(val_errors, splits.validation.sequences, v, &tables);
      const double val_auc = eval::roc_auc(eval::make_predictions(val_set.scores, val_labels));
      const auto test_set = scoring::score_variant(test_errors, splits.test.sequences, v, &tables);
      const auto preds = eval::make_predictions(test_set.scores, test_labels, test_lengths);
      const eval::VariantReport rep = eval::evaluate(preds, opts.target_recall);
      ms.validation_roc_auc[name] = val_auc;
      ms.test[name] = rep;
      if (val_auc > best_val) {
        best_val = val_auc;
        ms.best_variant = name;
      }
      const std::string key = kind_name + "/" + name;
      nlohmann::json entry = eval::report_to_json(rep);
      entry["validation_roc_auc"] = val_auc;
      r.report[key] = entry;
      scoring::write_scores(scores_csv, test_set, rep.calibration.threshold, false);
      write_variant_artifacts(g, key, preds, rep, outputs, opts.plot ? &roc_curves : nullptr,
                              opts.plot ? &pr_curves : nullptr);
      sweep_csv << kind_name << ',' << name << ',' << scoring::format_double(val_auc) << ','
                << scoring::format_double(rep.roc_auc) << ',' << scoring::format_double(rep.pr_auc)
                << ',' << scoring::format_double(rep.calibration.achieved_precision) << ','
                << scoring::format_double(rep.calibration.threshold) << '\n';
      if (!test_set.fallback_classes.empty()) {
        r.warnings.push_back(key + ": " + std::to_string(test_set.fallback_classes.size()) +
                             " classes without validation errors use the pooled EDF");
      }
    }
    const std::string scores_path = out_path(g, "scores_" + kind_name + ".csv");
    write_file(scores_path, scores_csv.str());
    outputs.push_back(scores_path);

    // EDF benefit check: summed EDF-normalized error matrix against the
    // plain summed error vector, compared at the calibrated recall.
    const auto& edf = ms.test.at("matrix-sum-edf").calibration;
    const auto& raw = ms.test.at("vector-sum-raw").calibration;
    const bool holds = edf.achieved_precision >= raw.achieved_precision;
    r.report["edf_benefit"][kind_name] = {{"edf_variant", "matrix-sum-edf"},
                                          {"raw_variant", "vector-sum-raw"},
                                          {"edf_precision", edf.achieved_precision},
                                          {"raw_precision", raw.achieved_precision},
                                          {"edf_recall", edf.achieved_recall},
                                          {"raw_recall", raw.achieved_recall},
                                          {"holds", holds}};
    if (!holds) {
      r.warnings.push_back(kind_name +
                           ": EDF normalization did not raise precision at the target recall "
                           "(matrix-sum-edf " +
                           scoring::format_double(edf.achieved_precision) + " < vector-sum-raw " +
                           scoring::format_double(raw.achieved_precision) +
                           "); this diverges from the reference finding");
    }
    r.report["best"][kind_name] = {{"variant", ms.best_variant},
                                   {"validation_roc_auc", best_val},
                                   {"roc_auc", ms.test.at(ms.best_variant).roc_auc}};
    r.models.push_back(std::move(ms));
  }

  note(g, "fitting the isolation forest baseline");
  auto base = baseline::run_baseline(splits.train, splits.test, opts.baseline);
  r.baseline_roc_auc = base.roc_auc;
  r.report["isolation_forest"] = base.to_json(opts.baseline.contamination);
  if (base.roc_auc) {
    for (const auto& m : r.models) {
      const std::string kind_name(models::model_kind_name(m.kind));
      r.report["best"][kind_name]["margin_over_isolation_forest"] =
          m.test.at(m.best_variant).roc_auc - *base.roc_auc;
    }
  }
  r.report["warnings"] = r.warnings;

  const std::string csv_path = out_path(g, "sweep.csv");
  write_file(csv_path, sweep_csv.str());
  outputs.push_back(csv_path);
  if (opts.plot) write_plots(g, roc_curves, pr_curves, outputs);
  r.report_path = out_path(g, opts.output);
  write_file(r.report_path, dump(r.report));
  outputs.insert(outputs.begin(), r.report_path);

  nlohmann::json kinds = nlohmann::json::array();
  for (const auto k : opts.kinds) kinds.push_back(std::string(models::model_kind_name(k)));
  write_manifest(g, "sweep",
                 {{"data", opts.data_path},
                  {"models", kinds},
                  {"model_configs", model_configs},
                  {"target", std::string(seqdata::channel_name(opts.target))},
                  {"split", split_to_json(opts.split)},
                  {"target_recall", opts.target_recall},
                  {"baseline", baseline_config_json(opts.baseline)},
                  {"output", opts.output}},
                 outputs);
  return r;
}

}  // namespace claimseq::cli
