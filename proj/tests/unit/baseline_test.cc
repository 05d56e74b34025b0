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

#include "claimseq/baseline.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "claimseq/datagen.h"
#include "claimseq/error.h"
#include "claimseq/rng.h"

namespace claimseq::baseline {
namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0;
  double aa = 0.0;
  double bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

// Sequences drawn from one of two disjoint token groups {1,2,3} and {4,5,6}.
std::vector<std::vector<int>> two_topic_corpus(std::size_t n, Rng& rng) {
  std::vector<std::vector<int>> corpus;
  for (std::size_t i = 0; i < n; ++i) {
    const int base = rng.below(2) == 0 ? 1 : 4;
    std::vector<int> s(8);
    for (int& t : s) t = base + static_cast<int>(rng.below(3));
    corpus.push_back(s);
  }
  return corpus;
}

// A tight Gaussian cluster around the origin.
std::vector<std::vector<double>> cluster(std::size_t n, Rng& rng) {
  std::vector<std::vector<double>> points;
  for (std::size_t i = 0; i < n; ++i) points.push_back({rng.normal(), rng.normal()});
  return points;
}

std::vector<std::uint64_t> iota_keys(std::size_t n) {
  std::vector<std::uint64_t> keys(n);
  std::iota(keys.begin(), keys.end(), 1000);
  return keys;
}

TEST(PathLength, HarmonicAndAverage) {
  EXPECT_EQ(harmonic(0), 0.0);
  EXPECT_EQ(harmonic(1), 1.0);
  EXPECT_DOUBLE_EQ(harmonic(4), 25.0 / 12.0);
  EXPECT_DOUBLE_EQ(harmonic(10), 7381.0 / 2520.0);
  EXPECT_DOUBLE_EQ(harmonic(11), std::log(11.0) + 0.5772156649);
  EXPECT_EQ(average_path_length(0), 0.0);
  EXPECT_EQ(average_path_length(1), 0.0);
  EXPECT_DOUBLE_EQ(average_path_length(2), 1.0);
  EXPECT_DOUBLE_EQ(average_path_length(3), 2.0 * 1.5 - 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(average_path_length(256),
                   2.0 * (std::log(255.0) + 0.5772156649) - 2.0 * 255.0 / 256.0);
}

TEST(IsolationForest, OutlierScoresHighest) {
  Rng rng(1);
  auto points = cluster(300, rng);
  points.push_back({9.0, -9.0});
  const auto keys = iota_keys(points.size());
  const IsolationForest forest = IsolationForest::fit(points, keys, {100, 256, 3});
  EXPECT_EQ(forest.num_trees(), 100);
  EXPECT_EQ(forest.subsample_size(), 256);
  EXPECT_EQ(forest.height_limit(), 8);
  const double outlier = forest.score(points.back());
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const double s = forest.score(points[i]);
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
    EXPECT_LT(s, outlier);
  }
  EXPECT_GT(outlier, 0.6);
  const double e = forest.expected_path_length(points.back());
  EXPECT_DOUBLE_EQ(outlier, std::pow(2.0, -e / average_path_length(256)));
}

TEST(IsolationForest, IndependentOfPointOrder) {
  Rng rng(2);
  const auto points = cluster(120, rng);
  const auto keys = iota_keys(points.size());
  std::vector<std::size_t> perm(points.size());
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm.begin(), perm.end());
  std::vector<std::vector<double>> shuffled;
  std::vector<std::uint64_t> shuffled_keys;
  for (const std::size_t i : perm) {
    shuffled.push_back(points[i]);
    shuffled_keys.push_back(keys[i]);
  }
  const IsolationForestConfig config{25, 64, 4};
  const auto a = IsolationForest::fit(points, keys, config);
  const auto b = IsolationForest::fit(shuffled, shuffled_keys, config);
  for (const auto& p : points) EXPECT_EQ(a.score(p), b.score(p));
  EXPECT_EQ(a.subsample_size(), 64);

  // Fewer points than the subsample size use every point.
  const std::vector<std::vector<double>> few(points.begin(), points.begin() + 10);
  const auto small = IsolationForest::fit(few, std::span(keys).first(10), config);
  EXPECT_EQ(small.subsample_size(), 10);
  EXPECT_EQ(small.height_limit(), 4);
}

TEST(IsolationForest, Errors) {
  const std::vector<std::vector<double>> one = {{1.0}};
  EXPECT_THROW(IsolationForest::fit(one, iota_keys(1), {}), EmptyInputError);
  const std::vector<std::vector<double>> two = {{1.0}, {2.0}};
  EXPECT_THROW(IsolationForest::fit(two, iota_keys(1), {}), ShapeError);
  const std::vector<std::vector<double>> ragged = {{1.0}, {2.0, 3.0}};
  EXPECT_THROW(IsolationForest::fit(ragged, iota_keys(2), {}), ShapeError);
  EXPECT_THROW(IsolationForest::fit(two, iota_keys(2), {0, 256, 7}), ConfigError);
  EXPECT_THROW(IsolationForest::fit(two, iota_keys(2), {10, 1, 7}), ConfigError);
}

TEST(Classify, FlagsCeilOfContamination) {
  const std::vector<double> scores = {0.1, 0.9, 0.5, 0.9, 0.3, 0.2, 0.7, 0.4, 0.6, 0.8};
  const std::vector<bool> labels = {false, true, false, false, false,
                                    false, true, false, false, false};
  const auto c = baseline_classify(scores, &labels, 0.15);
  EXPECT_EQ(c.flagged, 2u);  // ceil(1.5)
  // Tied top scores: both 0.9 entries are flagged.
  EXPECT_TRUE(c.flags[1]);
  EXPECT_TRUE(c.flags[3]);
  EXPECT_EQ(c.true_positives, 1u);
  EXPECT_EQ(c.precision, 0.5);
  EXPECT_EQ(c.recall, 0.5);

  // A tie at the cut goes to the earlier point.
  const auto tie = baseline_classify(std::vector<double>{0.2, 0.9, 0.9}, nullptr, 0.3);
  EXPECT_EQ(tie.flags, (std::vector<bool>{false, true, false}));
  EXPECT_FALSE(tie.precision.has_value());

  // 0.07 * 100 is 7.000000000000001 in binary and still flags 7.
  EXPECT_EQ(baseline_classify(std::vector<double>(100, 1.0), nullptr, 0.07).flagged, 7u);

  const std::vector<bool> negatives(10, false);
  EXPECT_FALSE(baseline_classify(scores, &negatives, 0.2).recall.has_value());
  EXPECT_THROW(baseline_classify(scores, nullptr, 0.0), ConfigError);
  EXPECT_THROW(baseline_classify(scores, nullptr, 1.0), ConfigError);
  const std::vector<bool> short_labels(3, false);
  EXPECT_THROW(baseline_classify(scores, &short_labels, 0.2), ShapeError);
}

TEST(SkipGram, CoOccurringTokensEmbedTogether) {
  Rng rng(3);
  const auto corpus = two_topic_corpus(400, rng);
  SkipGramConfig config;
  config.embed_size = 8;
  config.epochs = 5;
  const auto result = train_skipgram(corpus, 6, config);
  ASSERT_EQ(result.loss_history.size(), 5u);
  EXPECT_LT(result.loss_history.back(), result.loss_history.front());
  const auto& table = result.embeddings;
  double within = 0.0;
  double across = 0.0;
  int within_n = 0;
  int across_n = 0;
  for (int a = 1; a <= 6; ++a) {
    for (int b = a + 1; b <= 6; ++b) {
      const double c = cosine(table.row(a), table.row(b));
      const bool same = (a <= 3) == (b <= 3);
      (same ? within : across) += c;
      (same ? within_n : across_n) += 1;
    }
  }
  EXPECT_GT(within / within_n, across / across_n + 0.5);

  const auto again = train_skipgram(corpus, 6, config);
  for (int id = 1; id <= 6; ++id) {
    EXPECT_TRUE(std::ranges::equal(again.embeddings.row(id), table.row(id)));
  }
}

TEST(SkipGram, SequenceEmbeddingAndErrors) {
  EmbeddingTable table(3, 2);
  table.row(1)[0] = 1.0;
  table.row(2)[1] = 2.0;
  table.row(3)[0] = -1.0;
  const auto mean = embed_sequence(std::vector<int>{1, 2, 2}, table);
  EXPECT_DOUBLE_EQ(mean[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(mean[1], 4.0 / 3.0);
  EXPECT_THROW(embed_sequence(std::vector<int>{}, table), EmptyInputError);
  EXPECT_THROW(embed_sequence(std::vector<int>{4}, table), VocabularyError);
  EXPECT_THROW(table.row(0), VocabularyError);

  const SkipGramConfig config;
  EXPECT_THROW(train_skipgram({}, 3, config), EmptyInputError);
  EXPECT_THROW(train_skipgram({{1, 1, 1}}, 3, config), DataError);
  SkipGramConfig bad = config;
  bad.window = 0;
  EXPECT_THROW(train_skipgram({{1, 2}}, 3, bad), ConfigError);
  bad = config;
  bad.learning_rate = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(RunBaseline, ScoresEveryPatientOfTheScoreSet) {
  datagen::GenConfig gc;
  gc.num_patients = 400;
  gc.dict_sizes.treatment = 40;
  gc.fraud_rate = 0.05;
  const auto data = datagen::gen_dataset(gc);
  const auto splits = seqdata::split_dataset(data.dataset, {0.7, 0.15, 0.15}, 7);
  BaselineConfig config;
  config.skipgram.embed_size = 8;
  config.skipgram.epochs = 2;
  config.forest.num_trees = 20;
  config.contamination = 0.05;
  const BaselineResult r = run_baseline(splits.train, splits.test, config);
  ASSERT_EQ(r.scores.size(), splits.test.size());
  ASSERT_EQ(r.patient_ids.size(), splits.test.size());
  EXPECT_EQ(r.patient_ids.front(), splits.test.sequences.front().patient_id);
  EXPECT_TRUE(r.roc_auc.has_value());
  EXPECT_TRUE(r.pr_auc.has_value());
  EXPECT_EQ(r.classification.flagged,
            static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(splits.test.size()))));
  EXPECT_EQ(r.skipgram_loss.size(), 2u);
  const auto j = r.to_json(config.contamination);
  EXPECT_EQ(j["channel"], "treatment");
  EXPECT_EQ(j["flagged"], r.classification.flagged);

  const BaselineResult again = run_baseline(splits.train, splits.test, config);
  EXPECT_EQ(again.scores, r.scores);
  EXPECT_THROW(run_baseline(seqdata::Dataset{}, splits.test, config), EmptyInputError);
}

}  // namespace
}  // namespace claimseq::baseline
