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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "claimseq/error.h"
#include "commands.h"

namespace claimseq::cli {
namespace {

namespace fs = std::filesystem;

// Fresh scratch directory named after the running test.
fs::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  const fs::path dir = fs::temp_directory_path() / "claimseq_cli_test" /
                       (std::string(info->test_suite_name()) + "." + info->name());
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

GlobalOptions options_in(const fs::path& dir) {
  GlobalOptions g;
  g.out_dir = dir.string();
  g.seed = 3;
  return g;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_text(p)); }

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

// Runs the claimseq executable and returns its exit status.
int run_binary(const std::string& args, const fs::path& dir) {
  const std::string cmd =
      "cd '" + dir.string() + "' && '" + CLAIMSEQ_BIN + "' -q " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Small labeled dataset with fraud in every split.
std::string generate(const GlobalOptions& g, int patients = 240) {
  const auto opts = resolve_gen(
      g, {{"patients", patients}, {"treatments", 24}, {"fraud_rate", 0.1}, {"mean_length", 5.0}});
  return run_gen(g, opts).dataset_path;
}

TEST(Options, SplitParsing) {
  const auto s = parse_split("0.7,0.15,0.15");
  EXPECT_EQ(s.train, 0.7);
  EXPECT_EQ(s.validation, 0.15);
  EXPECT_EQ(s.test, 0.15);
  EXPECT_THROW(parse_split("0.7,0.3"), ConfigError);
  EXPECT_THROW(parse_split("0.7,x,0.3"), ConfigError);
  EXPECT_THROW(parse_split("0.7,0.1abc,0.2"), ConfigError);
  EXPECT_EQ(split_from_json(split_to_json(s)).validation, 0.15);
  EXPECT_EQ(split_from_json("0.5,0.25,0.25").test, 0.25);
  EXPECT_THROW(split_from_json(nlohmann::json::array({0.5, 0.5})), ConfigError);
}

TEST(Options, FlagsOverrideConfigOverDefaults) {
  GlobalOptions g;
  EXPECT_EQ(resolve_gen(g, nlohmann::json::object()).config.num_patients, 1000);
  g.config = {{"gen", {{"patients", 50}, {"zipf", 1.4}}}};
  const auto from_config = resolve_gen(g, nlohmann::json::object());
  EXPECT_EQ(from_config.config.num_patients, 50);
  EXPECT_EQ(from_config.config.zipf_exponent, 1.4);
  const auto from_flag = resolve_gen(g, {{"patients", 70}});
  EXPECT_EQ(from_flag.config.num_patients, 70);
  EXPECT_EQ(from_flag.config.zipf_exponent, 1.4);
  EXPECT_EQ(from_flag.config.seed, g.seed);

  g.profile = models::Profile::kPaper;
  EXPECT_EQ(resolve_gen(g, nlohmann::json::object()).config.dict_sizes.treatment, 2204);
  EXPECT_EQ(resolve_gen(g, {{"paper_shaped", false}}).config.dict_sizes.treatment, 200);

  g.config = {{"gen", 5}};
  EXPECT_THROW(resolve_gen(g, nlohmann::json::object()), ConfigError);
  g.config = {{"gen", {{"patients", "many"}}}};
  EXPECT_THROW(resolve_gen(g, nlohmann::json::object()), ConfigError);
  g.config = nlohmann::json::object();
  EXPECT_THROW(resolve_gen(g, {{"fraud_kind", "forgery"}}), ConfigError);
  EXPECT_THROW(resolve_gen(g, {{"fraud_rate", 1.5}}), ConfigError);
}

TEST(Options, TrainResolution) {
  GlobalOptions g;
  g.seed = 19;
  EXPECT_THROW(resolve_train(g, models::ModelKind::kLstm, nlohmann::json::object()), ConfigError);
  g.config = {{"train", {{"data", "d.csv"}, {"epochs", 3}, {"model", {{"hidden_size", 5}}}}}};
  const auto o = resolve_train(g, models::ModelKind::kLstm, {{"epochs", 2}, {"embed", 6}});
  const auto& cfg = std::get<models::NextTokenConfig>(o.model);
  EXPECT_EQ(cfg.training.epochs, 2);
  EXPECT_EQ(cfg.training.seed, 19u);
  EXPECT_EQ(cfg.hidden_size, 5);
  EXPECT_EQ(cfg.target_embed, 6);
  EXPECT_EQ(o.output, "lstm.checkpoint.json");
  EXPECT_EQ(o.data_path, "d.csv");

  const auto ae = resolve_train(g, models::ModelKind::kAutoencoder, {{"embed", 4}, {"lr", 0.5}});
  const auto& acfg = std::get<models::AutoencoderConfig>(ae.model);
  EXPECT_EQ(acfg.embed_size, 4);
  EXPECT_EQ(acfg.training.base_lr, 0.5);
  EXPECT_THROW(resolve_train(g, models::ModelKind::kLstm, {{"epochs", -1}}), ConfigError);
  EXPECT_THROW(resolve_train(g, models::ModelKind::kLstm, {{"target", "cost"}}), ConfigError);
}

TEST(Options, ScoreAndEvalResolution) {
  GlobalOptions g;
  EXPECT_THROW(resolve_score(g, {{"data", "d.csv"}}), ConfigError);
  const nlohmann::json base = {{"checkpoint", "m.json"}, {"data", "d.csv"}};
  const auto single = resolve_score(g, base);
  ASSERT_EQ(single.variants.size(), 1u);
  EXPECT_EQ(single.variants[0].name(), "vector-sum-raw");
  EXPECT_EQ(single.subset, seqdata::SplitTag::kTest);
  auto flags = base;
  flags["pool"] = "max";
  flags["errors"] = "matrix";
  flags["edf"] = "on";
  EXPECT_EQ(resolve_score(g, flags).variants[0].name(), "matrix-max-edf");
  flags["all_variants"] = true;
  EXPECT_EQ(resolve_score(g, flags).variants.size(), 8u);
  EXPECT_THROW(resolve_score(g, {{"checkpoint", "m"}, {"data", "d"}, {"subset", "dev"}}),
               ConfigError);
  EXPECT_THROW(resolve_score(g, {{"checkpoint", "m"}, {"data", "d"}, {"target_recall", 0.0}}),
               ConfigError);

  EXPECT_THROW(resolve_eval(g, {{"data", "d.csv"}}), ConfigError);
  const auto e = resolve_eval(g, {{"scores", {"a.csv", "lstm=b.csv"}}, {"data", "d.csv"}});
  ASSERT_EQ(e.scores.size(), 2u);
  EXPECT_EQ(e.scores[0], (std::pair<std::string, std::string>{"", "a.csv"}));
  EXPECT_EQ(e.scores[1], (std::pair<std::string, std::string>{"lstm", "b.csv"}));

  EXPECT_THROW(resolve_baseline(g, {{"data", "d"}, {"contamination", 1.0}}), ConfigError);
  EXPECT_EQ(resolve_baseline(g, {{"data", "d"}}).channels.size(), 2u);
  EXPECT_THROW(resolve_sweep(g, {{"data", "d"}, {"models", "lstm,gru"}}), ConfigError);
}

TEST(Pipeline, GenTrainScoreEvalWithManifests) {
  const fs::path dir = scratch_dir();
  GlobalOptions g = options_in(dir);
  g.argv = {"claimseq", "test"};
  const std::string data = generate(g);
  EXPECT_TRUE(fs::exists(dir / "dataset.generator.json"));
  const auto gen_manifest = read_json(dir / "manifest-gen.json");
  EXPECT_EQ(gen_manifest["command"], "gen");
  EXPECT_EQ(gen_manifest["seed"], 3);
  EXPECT_EQ(gen_manifest["resolved"]["num_patients"], 240);
  EXPECT_EQ(gen_manifest["argv"], nlohmann::json::array({"claimseq", "test"}));
  EXPECT_TRUE(gen_manifest["versions"].contains("claimseq"));

  const auto train = run_train(
      g,
      resolve_train(
          g, models::ModelKind::kLstm,
          {{"data", data}, {"epochs", 2}, {"hidden", 8}, {"embed", 4}, {"split", "0.6,0.2,0.2"}}));
  EXPECT_EQ(train.train.epochs.size(), 2u);
  EXPECT_EQ(line_count(train.loss_path), 3u);
  EXPECT_EQ(read_json(dir / "manifest-train.json")["resolved"]["split"],
            nlohmann::json::array({0.6, 0.2, 0.2}));

  const auto score = run_score(
      g, resolve_score(
             g, {{"checkpoint", train.checkpoint_path}, {"data", data}, {"all_variants", true}}));
  EXPECT_EQ(score.sets.size(), 8u);
  EXPECT_EQ(score.calibrations.size(), 8u);
  for (const auto& [name, c] : score.calibrations) EXPECT_GE(c.achieved_recall, 0.8) << name;
  EXPECT_EQ(score.edf_paths.size(), 2u);
  EXPECT_EQ(line_count(score.scores_path), 1 + 8 * score.sets[0].scores.size());

  const auto eval = run_eval(g, resolve_eval(g, {{"scores", {"lstm=" + score.scores_path}},
                                                 {"data", data},
                                                 {"sweep", true},
                                                 {"plot", true}}));
  EXPECT_TRUE(eval.report.contains("lstm/matrix-sum-edf"));
  EXPECT_EQ(eval.report["sweep"].size(), 8u);
  EXPECT_EQ(line_count(dir / "sweep.csv"), 9u);
  EXPECT_TRUE(fs::exists(dir / "roc.svg"));
  EXPECT_TRUE(fs::exists(dir / "curves" / "lstm_vector-sum-raw.roc.csv"));
  const auto eval_manifest = read_json(dir / "manifest-eval.json");
  EXPECT_EQ(eval_manifest["outputs"][0], eval.report_path);

  // A fixed threshold replaces calibration.
  const auto fixed = run_score(g, resolve_score(g, {{"checkpoint", train.checkpoint_path},
                                                    {"data", data},
                                                    {"threshold", 0.5},
                                                    {"output", "fixed.csv"}}));
  EXPECT_TRUE(fixed.calibrations.empty());
}

TEST(Pipeline, EvalRejectsUnknownPatients) {
  const fs::path dir = scratch_dir();
  const GlobalOptions g = options_in(dir);
  const std::string data = generate(g, 60);
  std::ofstream(dir / "foreign.csv") << scoring::kScoreCsvHeader << "\nNOBODY,0.5,v,\n";
  EXPECT_THROW(
      run_eval(g, resolve_eval(g, {{"scores", {(dir / "foreign.csv").string()}}, {"data", data}})),
      DataError);
  EXPECT_THROW(
      run_eval(g, resolve_eval(g, {{"scores", {(dir / "absent.csv").string()}}, {"data", data}})),
      IoError);
}

TEST(Pipeline, SweepCoversTheVariantGrid) {
  const fs::path dir = scratch_dir();
  const GlobalOptions g = options_in(dir);
  const std::string data = generate(g);
  const auto r = run_sweep(
      g,
      resolve_sweep(
          g,
          {{"data", data}, {"epochs", 1}, {"hidden", 6}, {"split", "0.6,0.2,0.2"}, {"trees", 10}}));
  ASSERT_EQ(r.models.size(), 2u);
  EXPECT_EQ(line_count(dir / "sweep.csv"), 17u);
  for (const auto& m : r.models) {
    EXPECT_EQ(m.test.size(), 8u);
    EXPECT_EQ(m.validation_roc_auc.size(), 8u);
    EXPECT_TRUE(m.test.count(m.best_variant));
  }
  EXPECT_TRUE(r.report["best"].contains("lstm"));
  EXPECT_TRUE(r.report["best"].contains("autoencoder"));
  EXPECT_TRUE(r.report["edf_benefit"].contains("lstm"));
  EXPECT_TRUE(r.report.contains("isolation_forest"));
  EXPECT_TRUE(r.baseline_roc_auc.has_value());
  EXPECT_TRUE(fs::exists(dir / "manifest-sweep.json"));
  EXPECT_TRUE(fs::exists(dir / "scores_autoencoder.csv"));

  EXPECT_THROW(run_sweep(g, resolve_sweep(g, {{"data", data}, {"split", "1,0,0"}})), ConfigError);
}

TEST(ExitCodes, MatchErrorKinds) {
  const fs::path dir = scratch_dir();
  EXPECT_EQ(run_binary("", dir), 2);
  EXPECT_EQ(run_binary("--bogus gen", dir), 2);
  EXPECT_EQ(run_binary("--profile laptop gen --patients 10", dir), 2);
  EXPECT_EQ(run_binary("gen --fraud-rate 2", dir), 2);
  EXPECT_EQ(run_binary("train lstm --data missing.csv", dir), 1);
  std::ofstream(dir / "config.json") << "{not json";
  EXPECT_EQ(run_binary("--config config.json gen", dir), 2);
  std::ofstream(dir / "bad.csv") << "garbage\n1,2\n";
  EXPECT_EQ(run_binary("train lstm --data bad.csv", dir), 3);
  EXPECT_EQ(run_binary("gen --patients 80 --treatments 20 --fraud-rate 0.1", dir), 0);
  EXPECT_TRUE(fs::exists(dir / "dataset.csv"));
  EXPECT_EQ(run_binary("train lstm --data dataset.csv --epochs 1 --lr 1e300", dir), 4);
}

}  // namespace
}  // namespace claimseq::cli
