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

// Brute-force reference implementations used to cross-check the library.
// Each one follows the textbook definition directly and favours clarity
// over speed.
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <vector>

namespace claimseq::testing {

struct ScoredLabel {
  double score = 0.0;
  bool label = false;
};

// Twice the number of (positive, negative) wins, ties counting one.
inline std::uint64_t pairwise_twice_wins(std::span<const ScoredLabel> points) {
  std::uint64_t twice = 0;
  for (const auto& p : points) {
    if (!p.label) continue;
    for (const auto& n : points) {
      if (n.label) continue;
      if (p.score > n.score) twice += 2;
      if (p.score == n.score) twice += 1;
    }
  }
  return twice;
}

inline double pairwise_roc_auc(std::span<const ScoredLabel> points) {
  std::uint64_t pos = 0;
  std::uint64_t neg = 0;
  for (const auto& p : points) (p.label ? pos : neg) += 1;
  return static_cast<double>(pairwise_twice_wins(points)) / static_cast<double>(2 * pos * neg);
}

// Average precision by evaluating the rule score >= t at every distinct
// score, highest first.
inline double enumerated_pr_auc(std::span<const ScoredLabel> points) {
  std::set<double, std::greater<>> thresholds;
  std::size_t positives = 0;
  for (const auto& p : points) {
    thresholds.insert(p.score);
    positives += p.label;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (const double t : thresholds) {
    std::size_t tp = 0;
    std::size_t flagged = 0;
    for (const auto& p : points) {
      if (p.score >= t) {
        ++flagged;
        tp += p.label;
      }
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(flagged);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

// Strict-count EDF: share of samples strictly below e. An empty sample set
// defers to the pooled samples.
inline double strict_edf(std::span<const double> samples, std::span<const double> pooled,
                         double e) {
  const auto source = samples.empty() ? pooled : samples;
  std::size_t below = 0;
  for (const double s : source) below += s < e;
  return static_cast<double>(below) / static_cast<double>(source.size());
}

struct CalibrationOracle {
  double threshold = 0.0;
  std::size_t flagged = 0;
  std::size_t true_positives = 0;
  double recall = 0.0;
  double precision = 0.0;
};

// Tries every observed score as a threshold and keeps the largest one whose
// recall reaches the target.
inline std::optional<CalibrationOracle> enumerated_calibration(std::span<const ScoredLabel> points,
                                                               double target_recall) {
  std::size_t positives = 0;
  for (const auto& p : points) positives += p.label;
  if (positives == 0) return std::nullopt;
  std::optional<CalibrationOracle> best;
  for (const auto& candidate : points) {
    CalibrationOracle c;
    c.threshold = candidate.score;
    for (const auto& p : points) {
      if (p.score >= c.threshold) {
        ++c.flagged;
        c.true_positives += p.label;
      }
    }
    c.recall = static_cast<double>(c.true_positives) / static_cast<double>(positives);
    c.precision = static_cast<double>(c.true_positives) / static_cast<double>(c.flagged);
    if (c.recall >= target_recall && (!best || c.threshold > best->threshold)) best = c;
  }
  return best;
}

inline double fold_sum(std::span<const double> v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return s;
}

inline double fold_max(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (const double x : v) m = std::max(m, x);
  return m;
}

}  // namespace claimseq::testing
