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

#include <cstdint>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "claimseq/models.h"
#include "claimseq/seqdata.h"

namespace claimseq::scoring {

enum class ErrorShape { kVector, kMatrix };
enum class Pooling { kSum, kMax, kMean };
enum class Normalization { kRaw, kEdf };

std::string_view shape_name(ErrorShape shape);
std::string_view pooling_name(Pooling pooling);
std::string_view normalization_name(Normalization normalization);
ErrorShape parse_shape(std::string_view name);
Pooling parse_pooling(std::string_view name);
Normalization parse_normalization(std::string_view name);

struct Variant {
  ErrorShape shape = ErrorShape::kVector;
  Pooling pooling = Pooling::kSum;
  Normalization normalization = Normalization::kRaw;

  // "<shape>-<pooling>-<normalization>", e.g. "matrix-sum-edf".
  std::string name() const;
  static Variant parse(std::string_view name);
  bool operator==(const Variant&) const = default;
};

// {vector, matrix} x {sum, max} x {raw, edf}; mean pooling is left out.
std::vector<Variant> default_variants();

// Errors of the unmasked positions of one sequence, row-major
// positions x classes. Column k holds class id k + 1.
struct ErrorMatrix {
  int num_classes = 0;
  std::vector<int> labels;  // true class id per row
  std::vector<double> entries;

  std::size_t rows() const { return labels.size(); }
  std::span<const double> row(std::size_t j) const {
    return {entries.data() + j * static_cast<std::size_t>(num_classes),
            static_cast<std::size_t>(num_classes)};
  }
};

struct ErrorVector {
  std::vector<int> labels;
  std::vector<double> entries;
};

// Target-channel ids of the sequence's visits.
std::vector<int> true_labels(const seqdata::PatientSequence& seq, seqdata::Channel channel);

// e_jk = 1 - p_jk for the true class, p_jk otherwise. `labels` has one
// entry per unmasked position. Throws DataError for a pad or out-of-range
// label and ShapeError for a length mismatch.
ErrorMatrix error_matrix(const models::ProbabilitySet& probs, std::span<const int> labels);
ErrorVector error_vector(const models::ProbabilitySet& probs, std::span<const int> labels);

// Per-class empirical distribution functions with the strict-count rule
// EDF_k(e) = #{samples of k < e} / n_k. Classes without samples fall back
// to the pooled sample of all classes.
class EdfTable {
 public:
  EdfTable() = default;
  // samples[k - 1] holds the validation errors of class id k.
  static EdfTable build(std::vector<std::vector<double>> samples);

  int num_classes() const { return static_cast<int>(samples_.size()); }
  const std::vector<double>& samples(int class_id) const;
  bool uses_fallback(int class_id) const { return samples(class_id).empty(); }
  std::vector<int> fallback_classes() const;

  double query(int class_id, double error) const;

  // {class_id: sorted samples}
  nlohmann::json to_json() const;
  static EdfTable from_json(const nlohmann::json& j, int num_classes);

 private:
  std::vector<std::vector<double>> samples_;
  std::vector<double> pooled_;
};

// Vector tables group true-label errors by true label; matrix tables group
// every entry by its column.
std::vector<std::vector<double>> edf_samples(std::span<const ErrorMatrix> errors, ErrorShape shape);

struct EdfTables {
  std::optional<EdfTable> vector;
  std::optional<EdfTable> matrix;

  const EdfTable& get(ErrorShape shape) const;
};

EdfTables build_edf_tables(std::span<const ErrorMatrix> validation_errors);

// Normalized errors plus the ids of classes answered by the pooled
// fallback.
template <typename Errors>
struct Normalized {
  Errors errors;
  std::vector<int> fallback_classes;
};

Normalized<ErrorVector> edf_transform(const ErrorVector& errors, const EdfTable& table);
Normalized<ErrorMatrix> edf_transform(const ErrorMatrix& errors, const EdfTable& table);

// Throws ShapeError on an empty input.
double aggregate(std::span<const double> entries, Pooling pooling);
double aggregate(const ErrorVector& errors, Pooling pooling);
double aggregate(const ErrorMatrix& errors, Pooling pooling);

// Score of one sequence from its error matrix. EDF variants need `tables`.
double score_errors(const ErrorMatrix& errors, const Variant& variant, const EdfTables* tables,
                    std::vector<int>* fallback_classes = nullptr);

struct ThresholdCalibration {
  double threshold = 0.0;
  double target_recall = 0.8;
  double achieved_recall = 0.0;
  double achieved_precision = 0.0;
  std::size_t flagged = 0;
  std::size_t true_positives = 0;
};

// Largest score t whose rule (score >= t) reaches the target recall.
// Throws CalibrationError without positives, ConfigError for a target
// outside (0, 1], ShapeError on a size mismatch.
ThresholdCalibration calibrate_threshold(std::span<const double> scores,
                                         const std::vector<bool>& labels, double target_recall);

struct ScoreSet {
  Variant variant;
  std::vector<std::string> patient_ids;
  std::vector<double> scores;
  std::vector<int> fallback_classes;
};

// Error matrices of every sequence, in order.
std::vector<ErrorMatrix> compute_errors(std::span<const models::ProbabilitySet> probs,
                                        std::span<const seqdata::PatientSequence> sequences,
                                        seqdata::Channel channel);

ScoreSet score_variant(std::span<const ErrorMatrix> errors,
                       std::span<const seqdata::PatientSequence> sequences, const Variant& variant,
                       const EdfTables* tables);

// forward -> errors -> (EDF) -> pooling for every patient of `ds`.
ScoreSet score_pipeline(const models::SequenceModel& model, const seqdata::Dataset& ds,
                        const Variant& variant, const EdfTables* tables);

// patient_id,score,variant,flagged. `flagged` is left empty without a
// threshold.
inline constexpr std::string_view kScoreCsvHeader = "patient_id,score,variant,flagged";

void write_scores(std::ostream& out, const ScoreSet& set, std::optional<double> threshold,
                  bool with_header = true);

struct ScoreRow {
  std::string patient_id;
  double score = 0.0;
  std::string variant;
  std::optional<bool> flagged;
};

std::vector<ScoreRow> read_scores(std::istream& in);

// Shortest round-trip decimal form.
std::string format_double(double value);

}  // namespace claimseq::scoring
