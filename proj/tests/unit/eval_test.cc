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

#include "claimseq/eval.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "claimseq/error.h"
#include "claimseq/rng.h"
#include "oracles.h"

namespace claimseq::eval {
namespace {

// Scores on a coarse grid so ties are common; positives lean higher.
std::vector<Prediction> random_instance(std::size_t n, Rng& rng) {
  std::vector<Prediction> out(n);
  for (auto& p : out) {
    p.label = rng.uniform() < 0.3;
    p.score = std::round((rng.uniform() + (p.label ? 0.25 : 0.0)) * 30.0) / 30.0;
    p.length = 1 + static_cast<int>(rng.below(40));
  }
  out[0].label = true;
  out[1].label = false;
  return out;
}

std::vector<testing::ScoredLabel> oracle_points(const std::vector<Prediction>& preds) {
  std::vector<testing::ScoredLabel> out;
  for (const auto& p : preds) out.push_back({p.score, p.label});
  return out;
}

TEST(RocAuc, Examples) {
  const auto perfect =
      make_predictions(std::vector<double>{0.9, 0.8, 0.2, 0.1}, {true, true, false, false});
  EXPECT_EQ(roc_auc(perfect), 1.0);
  EXPECT_EQ(pr_auc(perfect), 1.0);
  const auto reversed =
      make_predictions(std::vector<double>{0.1, 0.2, 0.8, 0.9}, {true, true, false, false});
  EXPECT_EQ(roc_auc(reversed), 0.0);
  const auto tied =
      make_predictions(std::vector<double>{0.5, 0.5, 0.5, 0.5}, {true, false, false, false});
  EXPECT_EQ(roc_auc(tied), 0.5);
  EXPECT_EQ(pr_auc(tied), 0.25);
  // One positive ranked second of four: ROC 2/3, AP 1/2.
  const auto second =
      make_predictions(std::vector<double>{0.9, 0.8, 0.2, 0.1}, {false, true, false, false});
  EXPECT_DOUBLE_EQ(roc_auc(second), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(pr_auc(second), 0.5);
}

TEST(RocAuc, MatchesPairwiseOracleExactly) {
  Rng rng(1);
  for (int instance = 0; instance < 100; ++instance) {
    const auto preds = random_instance(200, rng);
    const auto points = oracle_points(preds);
    EXPECT_EQ(roc_auc(preds), testing::pairwise_roc_auc(points)) << instance;
    EXPECT_NEAR(pr_auc(preds), testing::enumerated_pr_auc(points), 1e-12) << instance;
  }
}

TEST(RocAuc, InvariantUnderMonotoneMapsAndPermutation) {
  Rng rng(2);
  for (int instance = 0; instance < 50; ++instance) {
    auto preds = random_instance(100, rng);
    const double roc = roc_auc(preds);
    const double pr = pr_auc(preds);
    auto mapped = preds;
    for (auto& p : mapped) p.score = std::exp(3.0 * p.score) - 7.0;
    EXPECT_EQ(roc_auc(mapped), roc);
    EXPECT_NEAR(pr_auc(mapped), pr, 1e-15);
    rng.shuffle(preds.begin(), preds.end());
    EXPECT_EQ(roc_auc(preds), roc);
    EXPECT_NEAR(pr_auc(preds), pr, 1e-15);
  }
}

TEST(RocAuc, Errors) {
  const auto positives = make_predictions(std::vector<double>{0.1, 0.2}, {true, true});
  EXPECT_THROW(roc_auc(positives), MetricError);
  EXPECT_EQ(pr_auc(positives), 1.0);
  const auto negatives = make_predictions(std::vector<double>{0.1, 0.2}, {false, false});
  EXPECT_THROW(roc_auc(negatives), MetricError);
  EXPECT_THROW(pr_auc(negatives), MetricError);
  EXPECT_THROW(roc_auc(std::vector<Prediction>{}), MetricError);
  const auto nan = make_predictions(std::vector<double>{std::nan(""), 0.2}, {true, false});
  EXPECT_THROW(roc_auc(nan), MetricError);
  EXPECT_THROW(make_predictions(std::vector<double>{0.1}, {true, false}), ShapeError);
  EXPECT_THROW(make_predictions(std::vector<double>{0.1}, {true}, std::vector<int>{1, 2}),
               ShapeError);
}

TEST(Curves, ShapeAndIntegration) {
  Rng rng(3);
  for (int instance = 0; instance < 30; ++instance) {
    const auto preds = random_instance(150, rng);
    const auto roc = curve(preds, CurveKind::kRoc);
    ASSERT_GE(roc.size(), 2u);
    EXPECT_EQ(roc.front().x, 0.0);
    EXPECT_EQ(roc.front().y, 0.0);
    EXPECT_TRUE(std::isinf(roc.front().threshold));
    EXPECT_EQ(roc.back().x, 1.0);
    EXPECT_EQ(roc.back().y, 1.0);
    for (std::size_t i = 1; i < roc.size(); ++i) {
      EXPECT_GE(roc[i].x, roc[i - 1].x);
      EXPECT_GE(roc[i].y, roc[i - 1].y);
      EXPECT_LT(roc[i].threshold, roc[i - 1].threshold);
    }
    EXPECT_NEAR(integrate(roc, CurveKind::kRoc), roc_auc(preds), 1e-12);

    const auto pr = curve(preds, CurveKind::kPr);
    EXPECT_EQ(pr.front().x, 0.0);
    EXPECT_EQ(pr.front().y, 1.0);
    EXPECT_EQ(pr.back().x, 1.0);
    EXPECT_NEAR(integrate(pr, CurveKind::kPr), pr_auc(preds), 1e-12);
  }
  const auto one_class = make_predictions(std::vector<double>{0.1, 0.2}, {true, true});
  EXPECT_THROW(curve(one_class, CurveKind::kRoc), MetricError);
  EXPECT_NO_THROW(curve(one_class, CurveKind::kPr));
}

TEST(ByLength, BucketsAndUndefinedMetrics) {
  const std::vector<double> scores = {0.9, 0.1, 0.8, 0.3, 0.7, 0.2, 0.6, 0.4};
  const std::vector<bool> labels = {true, false, true, false, false, false, true, false};
  const std::vector<int> lengths = {1, 1, 2, 3, 4, 6, 9, 16};
  const auto buckets = metrics_by_length(make_predictions(scores, labels, lengths));
  ASSERT_EQ(buckets.size(), 5u);
  const std::vector<std::string> names = {"1", "2", "3-4", "5-8", "9-16"};
  const std::vector<std::size_t> counts = {2, 1, 2, 1, 2};
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(buckets[i].label(), names[i]);
    EXPECT_EQ(buckets[i].count, counts[i]);
  }
  EXPECT_EQ(buckets[0].roc_auc, 1.0);
  EXPECT_FALSE(buckets[1].roc_auc.has_value());  // positives only
  EXPECT_EQ(buckets[1].pr_auc, 1.0);
  EXPECT_FALSE(buckets[2].roc_auc.has_value());  // negatives only
  EXPECT_FALSE(buckets[2].pr_auc.has_value());
  EXPECT_EQ(buckets[4].roc_auc, 1.0);

  std::ostringstream csv;
  write_length_csv(csv, buckets);
  EXPECT_NE(csv.str().find("3-4,2,0,n/a,n/a"), std::string::npos);
  EXPECT_THROW(
      metrics_by_length(make_predictions(std::vector<double>{0.1}, {true}, std::vector<int>{0})),
      ShapeError);
}

TEST(ByLength, BucketMetricsMatchSubsets) {
  Rng rng(4);
  const auto preds = random_instance(400, rng);
  for (const auto& b : metrics_by_length(preds)) {
    std::vector<Prediction> members;
    for (const auto& p : preds) {
      if (p.length >= b.min_length && p.length <= b.max_length) members.push_back(p);
    }
    EXPECT_EQ(members.size(), b.count);
    if (b.roc_auc) {
      EXPECT_EQ(*b.roc_auc, testing::pairwise_roc_auc(oracle_points(members)));
    }
  }
}

TEST(Report, JsonFields) {
  Rng rng(5);
  const auto preds = random_instance(120, rng);
  const VariantReport r = evaluate(preds, 0.8);
  EXPECT_EQ(r.roc_auc, roc_auc(preds));
  EXPECT_GE(r.calibration.achieved_recall, 0.8);
  EXPECT_FALSE(r.by_length.empty());
  const auto j = report_to_json(r);
  EXPECT_EQ(precision_key(0.8), "precision_at_recall_0.8");
  for (const char* key : {"roc_auc", "pr_auc", "precision_at_recall_0.8", "recall", "threshold",
                          "flagged", "by_length"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["precision_at_recall_0.8"].get<double>(), r.calibration.achieved_precision);
  EXPECT_EQ(j["by_length"].size(), r.by_length.size());

  // Without lengths there is no breakdown.
  auto unsized = preds;
  for (auto& p : unsized) p.length = 0;
  EXPECT_TRUE(evaluate(unsized, 0.8).by_length.empty());
}

TEST(Report, CurveOutputs) {
  const auto preds =
      make_predictions(std::vector<double>{0.9, 0.4, 0.4, 0.1}, {true, false, true, false});
  const auto roc = curve(preds, CurveKind::kRoc);
  std::ostringstream csv;
  write_curve_csv(csv, roc, CurveKind::kRoc);
  EXPECT_EQ(csv.str(), "fpr,tpr,threshold\n0,0,inf\n0,0.5,0.9\n0.5,1,0.4\n1,1,0.1\n");
  std::ostringstream svg;
  const std::vector<NamedCurve> curves = {{"a", roc}, {"b", curve(preds, CurveKind::kRoc)}};
  write_curve_svg(svg, curves, CurveKind::kRoc);
  const std::string s = svg.str();
  EXPECT_EQ(s.rfind("<svg", 0), 0u);
  std::size_t lines = 0;
  for (auto pos = s.find("<polyline"); pos != std::string::npos; pos = s.find("<polyline", pos + 1))
    ++lines;
  EXPECT_EQ(lines, 2u);
}

}  // namespace
}  // namespace claimseq::eval
