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
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "claimseq/seqdata.h"

namespace claimseq::datagen {

enum class FraudKind {
  kSubstitution,   // replace treatments with ones implausible in context
  kRareInsertion,  // insert implausible, expensive visits
  kShuffle,        // permute a subset of visits
};
std::string_view fraud_kind_name(FraudKind kind);
FraudKind parse_fraud_kind(std::string_view name);

struct DictSizes {
  int treatment = 200;
  int treatment_type = 17;
  int cost_type = 11;
  int benefit_type = 24;
};

struct GenConfig {
  int num_patients = 1000;
  DictSizes dict_sizes;
  // Visit counts are geometric with this mean, truncated to the range.
  double mean_length = 12.0;
  int min_length = 1;
  int max_length = 128;
  double fraud_rate = 0.015;
  FraudKind fraud_kind = FraudKind::kSubstitution;
  // Fraction of a fraud patient's visits that are corrupted (at least one).
  double fraud_intensity = 0.3;
  double zipf_exponent = 1.1;
  std::uint64_t seed = 7;

  // 2204 treatments, matching the size of a production treatment dictionary.
  static GenConfig paper_shaped();
  void validate() const;
};

// Ground-truth generator. Treatment types follow a sparse first-order Markov
// chain (each type has a small successor set); treatments are drawn within
// their type with Zipf weights. A treatment whose type is not a successor
// of the previous visit's type has probability zero in that context.
class GeneratorModel {
 public:
  static GeneratorModel build(const GenConfig& config);

  int num_treatments() const { return static_cast<int>(type_of_.size()); }
  int num_types() const { return static_cast<int>(initial_.size()); }
  int num_cost_types() const { return static_cast<int>(cost_type_dist_.front().size()); }
  int num_benefit_types() const { return static_cast<int>(benefit_type_dist_.front().size()); }

  // All indices below are 0-based generator indices.
  int type_of(int treatment) const { return type_of_[static_cast<std::size_t>(treatment)]; }
  const std::vector<double>& initial() const { return initial_; }
  const std::vector<double>& transition(int type) const {
    return transition_[static_cast<std::size_t>(type)];
  }
  double within_type_weight(int treatment) const {
    return within_weight_[static_cast<std::size_t>(treatment)];
  }
  const std::vector<double>& cost_type_distribution(int type) const {
    return cost_type_dist_[static_cast<std::size_t>(type)];
  }
  const std::vector<double>& benefit_type_distribution(int type) const {
    return benefit_type_dist_[static_cast<std::size_t>(type)];
  }
  double cost_log_mean(int treatment) const {
    return cost_mu_[static_cast<std::size_t>(treatment)];
  }
  double cost_log_sd() const { return cost_sigma_; }

  // p(treatment | previous treatment); std::nullopt means first visit.
  double treatment_probability(int treatment, std::optional<int> previous) const;
  std::vector<double> conditional(std::optional<int> previous) const;
  // 10th percentile (nearest rank, lower) of the conditional probabilities
  // of all treatments in this context.
  double low_probability_threshold(std::optional<int> previous) const;
  // p(treatment | previous) <= low_probability_threshold(previous).
  bool implausible(int treatment, std::optional<int> previous) const;

  std::string treatment_token(int treatment) const;
  std::string type_token(int type) const;
  std::string cost_type_token(int cost_type) const;
  std::string benefit_type_token(int benefit_type) const;
  // Inverse of treatment_token; throws VocabularyError.
  int treatment_index(std::string_view token) const;

  nlohmann::json to_json() const;
  static GeneratorModel from_json(const nlohmann::json& j);

 private:
  std::vector<int> type_of_;
  std::vector<double> within_weight_;
  std::vector<double> initial_;
  std::vector<std::vector<double>> transition_;
  std::vector<std::vector<double>> cost_type_dist_;
  std::vector<std::vector<double>> benefit_type_dist_;
  std::vector<double> cost_mu_;
  double cost_sigma_ = 0.4;
  int token_width_ = 4;
};

struct GeneratedData {
  seqdata::Dataset dataset;
  GeneratorModel model;
  // Per patient (dataset order): indices of corrupted visits; empty for
  // normal patients.
  std::vector<std::vector<int>> corrupted_positions;
  std::vector<std::string> warnings;
};

GeneratedData gen_dataset(const GenConfig& config);

// {config, generator, fraud: {patient_id: [positions]}}
nlohmann::json sidecar_json(const GenConfig& config, const GeneratedData& data);
nlohmann::json gen_config_to_json(const GenConfig& config);

struct DatasetSummary {
  std::size_t num_patients = 0;
  std::size_t num_visits = 0;
  std::size_t fraud_count = 0;
  std::size_t labeled_count = 0;
  double fraud_rate = 0.0;  // fraud_count / labeled_count
  std::map<int, std::size_t> length_histogram;
  // Token counts per channel, indexed by id - 1.
  std::map<std::string, std::vector<std::size_t>> token_counts;

  nlohmann::json to_json(const seqdata::Dictionaries& dictionaries) const;
};

// Throws EmptyInputError for an empty dataset.
DatasetSummary describe_dataset(const seqdata::Dataset& ds);

}  // namespace claimseq::datagen
