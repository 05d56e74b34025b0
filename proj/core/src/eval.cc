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

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "claimseq/error.h"
#include "csv_util.h"

namespace claimseq::eval {

std::vector<Prediction> make_predictions(std::span<const double> scores,
                                         const std::vector<bool>& labels,
                                         std::span<const int> lengths) {
  if (scores.size() != labels.size() || (!lengths.empty() && lengths.size() != scores.size())) {
    throw ShapeError("make_predictions: size mismatch");
  }
  std::vector<Prediction> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = {scores[i], labels[i], lengths.empty() ? 0 : lengths[i]};
  }
  return out;
}

namespace {

struct Group {
  double score;
  double positives;
  double negatives;
};

// Distinct scores, descending, with class counts.
std::vector<Group> groups_descending(std::span<const Prediction> preds) {
  std::vector<Prediction> sorted(preds.begin(), preds.end());
  for (const Prediction& p : sorted) {
    if (!std::isfinite(p.score)) throw MetricError("non-finite score");
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const Prediction& a, const Prediction& b) { return a.score > b.score; });
  std::vector<Group> out;
  for (const Prediction& p : sorted) {
    if (out.empty() || out.back().score != p.score) out.push_back({p.score, 0.0, 0.0});
    (p.label ? out.back().positives : out.back().negatives) += 1.0;
  }
  return out;
}

struct Totals {
  double positives = 0.0;
  double negatives = 0.0;
};

Totals totals(std::span<const Group> groups) {
  Totals t;
  for (const Group& g : groups) {
    t.positives += g.positives;
    t.negatives += g.negatives;
  }
  return t;
}

}  // namespace

double roc_auc(std::span<const Prediction> preds) {
  const auto groups = groups_descending(preds);
  const Totals t = totals(groups);
  if (t.positives == 0.0 || t.negatives == 0.0) {
    throw MetricError("roc_auc needs at least one positive and one negative");
  }
  // Twice the Mann-Whitney count, kept integral so the sum is exact.
  double twice_wins = 0.0;
  double negatives_above = 0.0;
  for (const Group& g : groups) {
    const double negatives_below = t.negatives - negatives_above - g.negatives;
    twice_wins += g.positives * (2.0 * negatives_below + g.negatives);
    negatives_above += g.negatives;
  }
  return twice_wins / (2.0 * t.positives * t.negatives);
}

double pr_auc(std::span<const Prediction> preds) {
  const auto groups = groups_descending(preds);
  const Totals t = totals(groups);
  if (t.positives == 0.0) throw MetricError("pr_auc needs at least one positive");
  double area = 0.0;
  double tp = 0.0;
  double fp = 0.0;
  for (const Group& g : groups) {
    tp += g.positives;
    fp += g.negatives;
    area += g.positives / t.positives * (tp / (tp + fp));
  }
  return area;
}

std::vector<CurvePoint> curve(std::span<const Prediction> preds, CurveKind kind) {
  const auto groups = groups_descending(preds);
  const Totals t = totals(groups);
  if (t.positives == 0.0 || (kind == CurveKind::kRoc && t.negatives == 0.0)) {
    throw MetricError(kind == CurveKind::kRoc ? "ROC curve needs both classes"
                                              : "PR curve needs at least one positive");
  }
  std::vector<CurvePoint> points;
  points.push_back(kind == CurveKind::kRoc ? CurvePoint{0.0, 0.0} : CurvePoint{0.0, 1.0});
  double tp = 0.0;
  double fp = 0.0;
  for (const Group& g : groups) {
    tp += g.positives;
    fp += g.negatives;
    if (kind == CurveKind::kRoc) {
      points.push_back({fp / t.negatives, tp / t.positives, g.score});
    } else {
      points.push_back({tp / t.positives, tp / (tp + fp), g.score});
    }
  }
  return points;
}

double integrate(std::span<const CurvePoint> points, CurveKind kind) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    const double dx = points[i].x - points[i - 1].x;
    area += kind == CurveKind::kRoc ? dx * (points[i].y + points[i - 1].y) / 2.0 : dx * points[i].y;
  }
  return area;
}

std::string LengthBucket::label() const {
  if (min_length == max_length) return std::to_string(min_length);
  return std::to_string(min_length) + "-" + std::to_string(max_length);
}

std::vector<LengthBucket> metrics_by_length(std::span<const Prediction> preds) {
  std::map<int, std::vector<Prediction>> by_upper;
  for (const Prediction& p : preds) {
    if (p.length < 1) throw ShapeError("metrics_by_length: sequence length must be positive");
    by_upper[seqdata::padded_length_for(p.length)].push_back(p);
  }
  std::vector<LengthBucket> out;
  for (const auto& [upper, members] : by_upper) {
    LengthBucket b;
    b.max_length = upper;
    b.min_length = upper <= 2 ? upper : upper / 2 + 1;
    b.count = members.size();
    b.positives = static_cast<std::size_t>(
        std::count_if(members.begin(), members.end(), [](const Prediction& p) { return p.label; }));
    if (b.positives > 0) b.pr_auc = pr_auc(members);
    if (b.positives > 0 && b.positives < b.count) b.roc_auc = roc_auc(members);
    out.push_back(b);
  }
  return out;
}

VariantReport evaluate(std::span<const Prediction> preds, double target_recall) {
  VariantReport r;
  r.roc_auc = roc_auc(preds);
  r.pr_auc = pr_auc(preds);
  std::vector<double> scores;
  std::vector<bool> labels;
  for (const Prediction& p : preds) {
    scores.push_back(p.score);
    labels.push_back(p.label);
  }
  r.calibration = scoring::calibrate_threshold(scores, labels, target_recall);
  bool has_lengths = !preds.empty();
  for (const Prediction& p : preds) has_lengths = has_lengths && p.length > 0;
  if (has_lengths) r.by_length = metrics_by_length(preds);
  return r;
}

std::string precision_key(double target_recall) {
  return "precision_at_recall_" + internal::format_real(target_recall);
}

namespace {

nlohmann::json optional_metric(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json("n/a");
}

}  // namespace

nlohmann::json report_to_json(const VariantReport& report) {
  nlohmann::json buckets = nlohmann::json::array();
  for (const LengthBucket& b : report.by_length) {
    buckets.push_back({{"lengths", b.label()},
                       {"count", b.count},
                       {"positives", b.positives},
                       {"roc_auc", optional_metric(b.roc_auc)},
                       {"pr_auc", optional_metric(b.pr_auc)}});
  }
  const auto& c = report.calibration;
  return {{"roc_auc", report.roc_auc},
          {"pr_auc", report.pr_auc},
          {precision_key(c.target_recall), c.achieved_precision},
          {"recall", c.achieved_recall},
          {"threshold", c.threshold},
          {"flagged", c.flagged},
          {"by_length", buckets}};
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> points, CurveKind kind) {
  out << (kind == CurveKind::kRoc ? "fpr,tpr,threshold\n" : "recall,precision,threshold\n");
  for (const CurvePoint& p : points) {
    out << internal::format_real(p.x) << ',' << internal::format_real(p.y) << ','
        << (std::isinf(p.threshold) ? std::string("inf") : internal::format_real(p.threshold))
        << '\n';
  }
}

void write_length_csv(std::ostream& out, std::span<const LengthBucket> buckets) {
  out << "lengths,count,positives,roc_auc,pr_auc\n";
  const auto metric = [](const std::optional<double>& v) {
    return v ? internal::format_real(*v) : std::string("n/a");
  };
  for (const LengthBucket& b : buckets) {
    out << b.label() << ',' << b.count << ',' << b.positives << ',' << metric(b.roc_auc) << ','
        << metric(b.pr_auc) << '\n';
  }
}

void write_curve_svg(std::ostream& out, std::span<const NamedCurve> curves, CurveKind kind) {
  static constexpr const char* kColors[] = {"#1b6ac9", "#d1495b", "#2a9d8f", "#e9a03b",
                                            "#6a4c93", "#444444", "#8ab17d", "#b56576"};
  constexpr int kSize = 400;
  constexpr int kMargin = 40;
  const auto px = [](double v) { return kMargin + v * (kSize - 2 * kMargin); };
  const auto py = [](double v) { return kSize - kMargin - v * (kSize - 2 * kMargin); };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
      << "\">\n";
  out << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kSize - 2 * kMargin
      << "\" height=\"" << kSize - 2 * kMargin << "\" fill=\"none\" stroke=\"#000\"/>\n";
  out << "<text x=\"" << kSize / 2 << "\" y=\"" << kSize - 10 << "\" text-anchor=\"middle\">"
      << (kind == CurveKind::kRoc ? "FPR" : "Recall") << "</text>\n";
  out << "<text x=\"12\" y=\"" << kSize / 2 << "\" transform=\"rotate(-90 12 " << kSize / 2
      << ")\" text-anchor=\"middle\">" << (kind == CurveKind::kRoc ? "TPR" : "Precision")
      << "</text>\n";
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const char* color = kColors[c % std::size(kColors)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    const auto& pts = curves[c].points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      // PR curves are step functions: hold precision until the next recall.
      if (kind == CurveKind::kPr && i > 0) {
        out << px(pts[i - 1].x) << ',' << py(pts[i].y) << ' ';
      }
      out << px(pts[i].x) << ',' << py(pts[i].y) << ' ';
    }
    out << "\"/>\n";
    out << "<text x=\"" << kMargin + 8 << "\" y=\"" << kMargin + 16 + 14 * static_cast<int>(c)
        << "\" fill=\"" << color << "\" font-size=\"11\">" << curves[c].name << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace claimseq::eval
