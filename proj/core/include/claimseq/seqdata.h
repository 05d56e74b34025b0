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
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace claimseq::seqdata {

// Token channels of a visit. Each channel owns its own dictionary.
enum class Channel { kTreatment, kTreatmentType, kCostType, kBenefitType };

inline constexpr Channel kAllChannels[] = {Channel::kTreatment, Channel::kTreatmentType,
                                           Channel::kCostType, Channel::kBenefitType};

std::string_view channel_name(Channel channel);
// Accepts the CSV column names ("treatment", "treatment_type", ...).
Channel parse_channel(std::string_view name);

// Bijection between token strings and ids 1..size(). Id 0 is reserved for
// padding in every channel and never maps to a token.
class TokenDictionary {
 public:
  static constexpr int kPadId = 0;

  TokenDictionary() = default;
  TokenDictionary(std::string channel_name, std::vector<std::string> tokens);

  const std::string& channel_name() const { return channel_name_; }
  int size() const { return static_cast<int>(tokens_.size()); }

  // Throws VocabularyError for unknown tokens.
  int id_of(std::string_view token) const;
  std::optional<int> find(std::string_view token) const;
  // id in [1, size()].
  const std::string& token_of(int id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const TokenDictionary& other) const {
    return channel_name_ == other.channel_name_ && tokens_ == other.tokens_;
  }

 private:
  std::string channel_name_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct Dictionaries {
  TokenDictionary treatment;
  TokenDictionary treatment_type;
  TokenDictionary cost_type;
  TokenDictionary benefit_type;

  const TokenDictionary& get(Channel channel) const;
  bool operator==(const Dictionaries&) const = default;
};

// {channel -> [token strings in id order]}
nlohmann::json dictionaries_to_json(const Dictionaries& dicts);
Dictionaries dictionaries_from_json(const nlohmann::json& j);

struct VisitRecord {
  int treatment_id = 0;
  int treatment_type_id = 0;
  int cost_type_id = 0;
  int benefit_type_id = 0;
  std::int64_t treatment_number = 0;
  double factor = 0.0;
  double cost = 0.0;

  int token(Channel channel) const;
  bool is_pad() const {
    return treatment_id == 0 && treatment_type_id == 0 && cost_type_id == 0 && benefit_type_id == 0;
  }
  bool operator==(const VisitRecord&) const = default;
};

struct GeneralFeatures {
  double age = 0.0;
  int sex = 0;
  int insurance_type = 0;
  double total_invoice = 0.0;

  bool operator==(const GeneralFeatures&) const = default;
};

// Fixed-width numeric encoding of the general features: scaled age, sex
// one-hot, insurance type one-hot over `insurance_categories`, log invoice.
std::vector<double> encode_general(const GeneralFeatures& g, int insurance_categories);
inline int general_width(int insurance_categories) { return 4 + insurance_categories; }

struct PatientSequence {
  std::string patient_id;
  std::vector<VisitRecord> visits;
  GeneralFeatures general;
  std::optional<bool> fraud_label;

  int length() const { return static_cast<int>(visits.size()); }
  std::vector<int> tokens(Channel channel) const;
  bool operator==(const PatientSequence&) const = default;
};

// A sequence padded with all-zero visits; mask[j] is true for real visits.
struct PaddedSequence {
  PatientSequence sequence;
  std::vector<bool> mask;
  int true_length = 0;

  int padded_length() const { return static_cast<int>(mask.size()); }
  bool operator==(const PaddedSequence&) const = default;
};

// Smallest power of two >= n (n >= 1).
int padded_length_for(int n);

PaddedSequence pad_sequence(const PatientSequence& seq);
// Re-padding keeps the original mask.
PaddedSequence pad_sequence(const PaddedSequence& padded);

enum class SplitTag { kAll, kTrain, kValidation, kTest };
std::string_view split_name(SplitTag tag);

struct Dataset {
  std::vector<PatientSequence> sequences;
  Dictionaries dictionaries;
  SplitTag split = SplitTag::kAll;

  bool empty() const { return sequences.empty(); }
  std::size_t size() const { return sequences.size(); }
  bool has_labels() const;
  // Number of insurance-type categories (max observed id + 1, at least 1).
  int insurance_categories() const;
  // Throws VocabularyError if any id is outside its dictionary.
  void validate() const;
};

inline constexpr std::string_view kCsvHeader =
    "patient_id,visit_index,treatment,treatment_type,cost_type,benefit_type,"
    "treatment_number,factor,cost,age,sex,insurance_type,total_invoice,fraud_label";

struct LoadOptions {
  // When set, tokens are resolved against these dictionaries and unknown
  // tokens raise VocabularyError. Otherwise dictionaries are built from the
  // observed tokens, sorted lexicographically.
  std::optional<Dictionaries> frozen_dictionaries;
};

Dataset read_dataset(std::istream& in, const LoadOptions& options = {});
Dataset load_dataset(const std::string& path, const LoadOptions& options = {});
void write_dataset(std::ostream& out, const Dataset& ds);
void save_dataset(const std::string& path, const Dataset& ds);

// One visit in token-string form; used to assemble datasets without a CSV
// round-trip.
struct RawVisit {
  std::string treatment;
  std::string treatment_type;
  std::string cost_type;
  std::string benefit_type;
  std::int64_t treatment_number = 0;
  double factor = 0.0;
  double cost = 0.0;
};

struct RawPatient {
  std::string patient_id;
  std::vector<RawVisit> visits;
  GeneralFeatures general;
  std::optional<bool> fraud_label;
};

// Builds dictionaries exactly as read_dataset would for the same rows.
Dataset build_dataset(const std::vector<RawPatient>& patients, const LoadOptions& options = {});

struct SplitFractions {
  double train = 0.9025;
  double validation = 0.0475;
  double test = 0.05;
};

struct DatasetSplits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

// Patient-level split, stratified by fraud label when labels exist.
// Validation and test sizes are f * n rounded to nearest (ties toward the
// smaller count); the remainder goes to train.
DatasetSplits split_dataset(const Dataset& ds, const SplitFractions& fractions, std::uint64_t seed);

}  // namespace claimseq::seqdata
