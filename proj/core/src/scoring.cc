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

#include "claimseq/scoring.h"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include "claimseq/error.h"
#include "csv_util.h"

namespace claimseq::scoring {

std::string_view shape_name(ErrorShape shape) {
  return shape == ErrorShape::kVector ? "vector" : "matrix";
}

std::string_view pooling_name(Pooling pooling) {
  switch (pooling) {
    case Pooling::kSum:
      return "sum";
    case Pooling::kMax:
      return "max";
    case Pooling::kMean:
      return "mean";
  }
  return "?";
}

std::string_view normalization_name(Normalization normalization) {
  return normalization == Normalization::kRaw ? "raw" : "edf";
}

ErrorShape parse_shape(std::string_view name) {
  if (name == "vector") return ErrorShape::kVector;
  if (name == "matrix") return ErrorShape::kMatrix;
  throw ConfigError("unknown error shape '" + std::string(name) + "' (expected vector|matrix)");
}

Pooling parse_pooling(std::string_view name) {
  if (name == "sum") return Pooling::kSum;
  if (name == "max") return Pooling::kMax;
  if (name == "mean") return Pooling::kMean;
  throw ConfigError("unknown pooling '" + std::string(name) + "' (expected sum|max|mean)");
}

Normalization parse_normalization(std::string_view name) {
  if (name == "raw" || name == "off") return Normalization::kRaw;
  if (name == "edf" || name == "on") return Normalization::kEdf;
  throw ConfigError("unknown normalization '" + std::string(name) + "' (expected raw|edf)");
}

std::string Variant::name() const {
  return std::string(shape_name(shape)) + "-" + std::string(pooling_name(pooling)) + "-" +
         std::string(normalization_name(normalization));
}

Variant Variant::parse(std::string_view name) {
  const auto first = name.find('-');
  const auto second = first == std::string_view::npos ? first : name.find('-', first + 1);
  if (second == std::string_view::npos) {
    throw ConfigError("malformed variant '" + std::string(name) + "' (expected shape-pool-norm)");
  }
  Variant v;
  v.shape = parse_shape(name.substr(0, first));
  v.pooling = parse_pooling(name.substr(first + 1, second - first - 1));
  v.normalization = parse_normalization(name.substr(second + 1));
  return v;
}

std::vector<Variant> default_variants() {
  std::vector<Variant> out;
  for (const auto norm : {Normalization::kRaw, Normalization::kEdf}) {
    for (const auto shape : {ErrorShape::kVector, ErrorShape::kMatrix}) {
      for (const auto pool : {Pooling::kSum, Pooling::kMax}) out.push_back({shape, pool, norm});
    }
  }
  return out;
}

std::vector<int> true_labels(const seqdata::PatientSequence& seq, seqdata::Channel channel) {
  return seq.tokens(channel);
}

ErrorMatrix error_matrix(const models::ProbabilitySet& probs, std::span<const int> labels) {
  const auto unmasked =
      static_cast<std::size_t>(std::count(probs.mask.begin(), probs.mask.end(), true));
  if (unmasked != labels.size()) {
    throw ShapeError("error_matrix: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(unmasked) + " unmasked positions");
  }
  ErrorMatrix out;
  out.num_classes = probs.num_classes;
  out.labels.assign(labels.begin(), labels.end());
  out.entries.reserve(labels.size() * static_cast<std::size_t>(probs.num_classes));
  std::size_t next = 0;
  for (int j = 0; j < probs.padded_length(); ++j) {
    if (!probs.mask[static_cast<std::size_t>(j)]) continue;
    const int label = labels[next++];
    if (label == seqdata::TokenDictionary::kPadId) {
      throw DataError("error_matrix: pad label at unmasked position " + std::to_string(j));
    }
    if (label < 1 || label > probs.num_classes) {
      throw DataError("error_matrix: label " + std::to_string(label) + " outside 1.." +
                      std::to_string(probs.num_classes));
    }
    const auto row = probs.row(j);
    for (int k = 0; k < probs.num_classes; ++k) {
      const double p = row[static_cast<std::size_t>(k)];
      out.entries.push_back(k + 1 == label ? 1.0 - p : p);
    }
  }
  return out;
}

namespace {

ErrorVector true_label_slice(const ErrorMatrix& m) {
  ErrorVector v;
  v.labels = m.labels;
  v.entries.reserve(m.rows());
  for (std::size_t j = 0; j < m.rows(); ++j) {
    v.entries.push_back(m.row(j)[static_cast<std::size_t>(m.labels[j] - 1)]);
  }
  return v;
}

void append_unique(std::vector<int>& dst, const std::vector<int>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
  std::sort(dst.begin(), dst.end());
  dst.erase(std::unique(dst.begin(), dst.end()), dst.end());
}

}  // namespace

ErrorVector error_vector(const models::ProbabilitySet& probs, std::span<const int> labels) {
  return true_label_slice(error_matrix(probs, labels));
}

EdfTable EdfTable::build(std::vector<std::vector<double>> samples) {
  if (samples.empty()) throw EmptyInputError("EDF table needs at least one class");
  EdfTable t;
  for (auto& s : samples) {
    for (const double e : s) {
      if (!std::isfinite(e)) throw NumericError("EDF sample is not finite");
    }
    std::sort(s.begin(), s.end());
    t.pooled_.insert(t.pooled_.end(), s.begin(), s.end());
  }
  if (t.pooled_.empty()) throw EmptyInputError("EDF table built from no samples");
  std::sort(t.pooled_.begin(), t.pooled_.end());
  t.samples_ = std::move(samples);
  return t;
}

const std::vector<double>& EdfTable::samples(int class_id) const {
  if (class_id < 1 || class_id > num_classes()) {
    throw VocabularyError("EDF class " + std::to_string(class_id) + " outside 1.." +
                          std::to_string(num_classes()));
  }
  return samples_[static_cast<std::size_t>(class_id - 1)];
}

std::vector<int> EdfTable::fallback_classes() const {
  std::vector<int> out;
  for (int k = 1; k <= num_classes(); ++k) {
    if (uses_fallback(k)) out.push_back(k);
  }
  return out;
}

double EdfTable::query(int class_id, double error) const {
  const auto& own = samples(class_id);
  const auto& s = own.empty() ? pooled_ : own;
  const auto below = std::lower_bound(s.begin(), s.end(), error) - s.begin();
  return static_cast<double>(below) / static_cast<double>(s.size());
}

nlohmann::json EdfTable::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (int k = 1; k <= num_classes(); ++k) j[std::to_string(k)] = samples(k);
  return j;
}

EdfTable EdfTable::from_json(const nlohmann::json& j, int num_classes) {
  if (!j.is_object()) throw SchemaError("EDF table must be a JSON object");
  std::vector<std::vector<double>> samples(static_cast<std::size_t>(num_classes));
  for (const auto& [key, value] : j.items()) {
    int k = 0;
    try {
      k = std::stoi(key);
      samples.at(static_cast<std::size_t>(k - 1)) = value.get<std::vector<double>>();
    } catch (const std::exception&) {
      throw SchemaError("EDF table: bad class entry '" + key + "'");
    }
  }
  return build(std::move(samples));
}

std::vector<std::vector<double>> edf_samples(std::span<const ErrorMatrix> errors,
                                             ErrorShape shape) {
  if (errors.empty()) throw EmptyInputError("no validation errors for the EDF table");
  const auto d = static_cast<std::size_t>(errors.front().num_classes);
  std::vector<std::vector<double>> samples(d);
  for (const ErrorMatrix& m : errors) {
    if (static_cast<std::size_t>(m.num_classes) != d) throw ShapeError("EDF: class count mismatch");
    for (std::size_t j = 0; j < m.rows(); ++j) {
      const auto row = m.row(j);
      if (shape == ErrorShape::kVector) {
        const auto k = static_cast<std::size_t>(m.labels[j] - 1);
        samples[k].push_back(row[k]);
      } else {
        for (std::size_t k = 0; k < d; ++k) samples[k].push_back(row[k]);
      }
    }
  }
  return samples;
}

const EdfTable& EdfTables::get(ErrorShape shape) const {
  const auto& t = shape == ErrorShape::kVector ? vector : matrix;
  if (!t) {
    throw ConfigError("no " + std::string(shape_name(shape)) + " EDF table available");
  }
  return *t;
}

EdfTables build_edf_tables(std::span<const ErrorMatrix> validation_errors) {
  EdfTables t;
  t.vector = EdfTable::build(edf_samples(validation_errors, ErrorShape::kVector));
  t.matrix = EdfTable::build(edf_samples(validation_errors, ErrorShape::kMatrix));
  return t;
}

Normalized<ErrorVector> edf_transform(const ErrorVector& errors, const EdfTable& table) {
  Normalized<ErrorVector> out;
  out.errors.labels = errors.labels;
  out.errors.entries.reserve(errors.entries.size());
  std::set<int> fallback;
  for (std::size_t j = 0; j < errors.entries.size(); ++j) {
    const int k = errors.labels[j];
    if (table.uses_fallback(k)) fallback.insert(k);
    out.errors.entries.push_back(table.query(k, errors.entries[j]));
  }
  out.fallback_classes.assign(fallback.begin(), fallback.end());
  return out;
}

Normalized<ErrorMatrix> edf_transform(const ErrorMatrix& errors, const EdfTable& table) {
  if (errors.num_classes != table.num_classes()) {
    throw ShapeError("EDF table has " + std::to_string(table.num_classes()) + " classes, errors " +
                     std::to_string(errors.num_classes));
  }
  Normalized<ErrorMatrix> out;
  out.errors.num_classes = errors.num_classes;
  out.errors.labels = errors.labels;
  out.errors.entries.reserve(errors.entries.size());
  const auto d = static_cast<std::size_t>(errors.num_classes);
  for (std::size_t i = 0; i < errors.entries.size(); ++i) {
    out.errors.entries.push_back(table.query(static_cast<int>(i % d) + 1, errors.entries[i]));
  }
  if (!errors.entries.empty()) out.fallback_classes = table.fallback_classes();
  return out;
}

double aggregate(std::span<const double> entries, Pooling pooling) {
  if (entries.empty()) throw ShapeError("aggregate: no unmasked positions");
  switch (pooling) {
    case Pooling::kSum:
      return std::accumulate(entries.begin(), entries.end(), 0.0);
    case Pooling::kMax:
      return *std::max_element(entries.begin(), entries.end());
    case Pooling::kMean:
      return std::accumulate(entries.begin(), entries.end(), 0.0) /
             static_cast<double>(entries.size());
  }
  return 0.0;
}

double aggregate(const ErrorVector& errors, Pooling pooling) {
  return aggregate(std::span<const double>(errors.entries), pooling);
}

double aggregate(const ErrorMatrix& errors, Pooling pooling) {
  return aggregate(std::span<const double>(errors.entries), pooling);
}

double score_errors(const ErrorMatrix& errors, const Variant& variant, const EdfTables* tables,
                    std::vector<int>* fallback_classes) {
  const bool edf = variant.normalization == Normalization::kEdf;
  if (edf && tables == nullptr) {
    throw ConfigError("variant " + variant.name() + " needs an EDF table");
  }
  if (variant.shape == ErrorShape::kVector) {
    const ErrorVector v = true_label_slice(errors);
    if (!edf) return aggregate(v, variant.pooling);
    auto n = edf_transform(v, tables->get(ErrorShape::kVector));
    if (fallback_classes) append_unique(*fallback_classes, n.fallback_classes);
    return aggregate(n.errors, variant.pooling);
  }
  if (!edf) return aggregate(errors, variant.pooling);
  auto n = edf_transform(errors, tables->get(ErrorShape::kMatrix));
  if (fallback_classes) append_unique(*fallback_classes, n.fallback_classes);
  return aggregate(n.errors, variant.pooling);
}

ThresholdCalibration calibrate_threshold(std::span<const double> scores,
                                         const std::vector<bool>& labels, double target_recall) {
  if (scores.size() != labels.size()) throw ShapeError("calibrate_threshold: size mismatch");
  if (!(target_recall > 0.0 && target_recall <= 1.0)) {
    throw ConfigError("target recall must lie in (0, 1]");
  }
  const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), true));
  if (positives == 0) throw CalibrationError("cannot calibrate a threshold without positives");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  ThresholdCalibration c;
  c.target_recall = target_recall;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == t; ++i) tp += labels[order[i]] ? 1 : 0;
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    if (recall >= target_recall) {
      c.threshold = t;
      c.achieved_recall = recall;
      c.flagged = i;
      c.true_positives = tp;
      c.achieved_precision = static_cast<double>(tp) / static_cast<double>(i);
      return c;
    }
  }
  throw CalibrationError("target recall unreachable");  // recall reaches 1 above
}

std::vector<ErrorMatrix> compute_errors(std::span<const models::ProbabilitySet> probs,
                                        std::span<const seqdata::PatientSequence> sequences,
                                        seqdata::Channel channel) {
  if (probs.size() != sequences.size()) throw ShapeError("compute_errors: size mismatch");
  std::vector<ErrorMatrix> out;
  out.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out.push_back(error_matrix(probs[i], true_labels(sequences[i], channel)));
  }
  return out;
}

ScoreSet score_variant(std::span<const ErrorMatrix> errors,
                       std::span<const seqdata::PatientSequence> sequences, const Variant& variant,
                       const EdfTables* tables) {
  if (errors.size() != sequences.size()) throw ShapeError("score_variant: size mismatch");
  ScoreSet set;
  set.variant = variant;
  set.patient_ids.reserve(errors.size());
  set.scores.reserve(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    set.patient_ids.push_back(sequences[i].patient_id);
    set.scores.push_back(score_errors(errors[i], variant, tables, &set.fallback_classes));
  }
  return set;
}

ScoreSet score_pipeline(const models::SequenceModel& model, const seqdata::Dataset& ds,
                        const Variant& variant, const EdfTables* tables) {
  const auto probs = model.predict(ds.sequences);
  const auto errors = compute_errors(probs, ds.sequences, model.target_channel());
  return score_variant(errors, ds.sequences, variant, tables);
}

std::string format_double(double value) { return internal::format_real(value); }

void write_scores(std::ostream& out, const ScoreSet& set, std::optional<double> threshold,
                  bool with_header) {
  if (with_header) out << kScoreCsvHeader << '\n';
  const std::string variant = set.variant.name();
  for (std::size_t i = 0; i < set.scores.size(); ++i) {
    out << internal::quote_if_needed(set.patient_ids[i]) << ',' << format_double(set.scores[i])
        << ',' << variant << ',';
    if (threshold) out << (set.scores[i] >= *threshold ? 1 : 0);
    out << '\n';
  }
}

std::vector<ScoreRow> read_scores(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kScoreCsvHeader) {
    throw SchemaError("score file must start with '" + std::string(kScoreCsvHeader) + "'");
  }
  std::vector<ScoreRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = internal::split_csv_line(line);
    if (f.size() != 4) {
      throw SchemaError("score file line " + std::to_string(line_no) + ": expected 4 fields");
    }
    ScoreRow r;
    r.patient_id = f[0];
    const auto* end = f[1].data() + f[1].size();
    const auto [ptr, ec] = std::from_chars(f[1].data(), end, r.score);
    if (ec != std::errc() || ptr != end || !std::isfinite(r.score)) {
      throw DataError("score file line " + std::to_string(line_no) + ": bad score '" + f[1] + "'");
    }
    r.variant = f[2];
    if (f[3] == "1") {
      r.flagged = true;
    } else if (f[3] == "0") {
      r.flagged = false;
    } else if (!f[3].empty()) {
      throw DataError("score file line " + std::to_string(line_no) + ": bad flag '" + f[3] + "'");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace claimseq::scoring
