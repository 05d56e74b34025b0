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

#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "claimseq/scoring.h"

namespace claimseq::eval {

struct Prediction {
  double score = 0.0;
  bool label = false;
  int length = 0;  // true sequence length
};

std::vector<Prediction> make_predictions(std::span<const double> scores,
                                         const std::vector<bool>& labels,
                                         std::span<const int> lengths = {});

// P(random positive outranks random negative), ties counted one half.
// Throws MetricError unless both classes are present.
double roc_auc(std::span<const Prediction> preds);

// Average precision: sum over distinct thresholds, descending, of
// (R_k - R_{k-1}) * P_k. Throws MetricError without positives.
double pr_auc(std::span<const Prediction> preds);

enum class CurveKind { kRoc, kPr };

struct CurvePoint {
  double x = 0.0;  // FPR or recall
  double y = 0.0;  // TPR or precision
  // Score threshold of the rule score >= threshold; +inf for the start.
  double threshold = std::numeric_limits<double>::infinity();
};

// ROC: (0, 0) then one point per distinct threshold, ending at (1, 1).
// PR: (0, 1) then one (recall, precision) point per distinct threshold.
std::vector<CurvePoint> curve(std::span<const Prediction> preds, CurveKind kind);

// Trapezoids for ROC, right steps for PR; reproduces roc_auc / pr_auc.
double integrate(std::span<const CurvePoint> points, CurveKind kind);

struct LengthBucket {
  int min_length = 0;
  int max_length = 0;
  std::size_t count = 0;
  std::size_t positives = 0;
  std::optional<double> roc_auc;  // undefined without both classes
  std::optional<double> pr_auc;   // undefined without positives

  std::string label() const;
};

// Buckets [1], [2], [3-4], [5-8], ... by true length; empty buckets are
// omitted.
std::vector<LengthBucket> metrics_by_length(std::span<const Prediction> preds);

struct VariantReport {
  double roc_auc = 0.0;
  double pr_auc = 0.0;
  scoring::ThresholdCalibration calibration;
  std::vector<LengthBucket> by_length;
};

VariantReport evaluate(std::span<const Prediction> preds, double target_recall);

// {roc_auc, pr_auc, precision_at_recall_<r>, recall, threshold, by_length}
nlohmann::json report_to_json(const VariantReport& report);
std::string precision_key(double target_recall);

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> points, CurveKind kind);
void write_length_csv(std::ostream& out, std::span<const LengthBucket> buckets);

// Minimal SVG line chart of one or more curves.
struct NamedCurve {
  std::string name;
  std::vector<CurvePoint> points;
};
void write_curve_svg(std::ostream& out, std::span<const NamedCurve> curves, CurveKind kind);

}  // namespace claimseq::eval
