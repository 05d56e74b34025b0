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

#include "claimseq/seqdata.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "claimseq/error.h"
#include "claimseq/rng.h"
#include "csv_util.h"

namespace claimseq::seqdata {

std::string_view channel_name(Channel channel) {
  switch (channel) {
    case Channel::kTreatment:
      return "treatment";
    case Channel::kTreatmentType:
      return "treatment_type";
    case Channel::kCostType:
      return "cost_type";
    case Channel::kBenefitType:
      return "benefit_type";
  }
  return "?";
}

Channel parse_channel(std::string_view name) {
  for (const Channel c : kAllChannels) {
    if (channel_name(c) == name) return c;
  }
  throw ConfigError("unknown channel '" + std::string(name) + "'");
}

TokenDictionary::TokenDictionary(std::string channel_name, std::vector<std::string> tokens)
    : channel_name_(std::move(channel_name)), tokens_(std::move(tokens)) {
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty()) {
      throw VocabularyError("empty token in dictionary '" + channel_name_ + "'");
    }
    if (!index_.emplace(tokens_[i], static_cast<int>(i) + 1).second) {
      throw VocabularyError("duplicate token '" + tokens_[i] + "' in dictionary '" + channel_name_ +
                            "'");
    }
  }
}

int TokenDictionary::id_of(std::string_view token) const {
  const auto id = find(token);
  if (!id) {
    throw VocabularyError("unknown " + channel_name_ + " token '" + std::string(token) + "'");
  }
  return *id;
}

std::optional<int> TokenDictionary::find(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& TokenDictionary::token_of(int id) const {
  if (id < 1 || id > size()) {
    throw VocabularyError("id " + std::to_string(id) + " out of range for dictionary '" +
                          channel_name_ + "' of size " + std::to_string(size()));
  }
  return tokens_[static_cast<std::size_t>(id - 1)];
}

const TokenDictionary& Dictionaries::get(Channel channel) const {
  switch (channel) {
    case Channel::kTreatment:
      return treatment;
    case Channel::kTreatmentType:
      return treatment_type;
    case Channel::kCostType:
      return cost_type;
    case Channel::kBenefitType:
      return benefit_type;
  }
  return treatment;
}

nlohmann::json dictionaries_to_json(const Dictionaries& dicts) {
  nlohmann::json j = nlohmann::json::object();
  for (const Channel c : kAllChannels) {
    j[std::string(channel_name(c))] = dicts.get(c).tokens();
  }
  return j;
}

Dictionaries dictionaries_from_json(const nlohmann::json& j) {
  auto read = [&](Channel c) {
    const std::string name(channel_name(c));
    if (!j.contains(name)) throw SchemaError("dictionary JSON lacks channel '" + name + "'");
    return TokenDictionary(name, j.at(name).get<std::vector<std::string>>());
  };
  return Dictionaries{read(Channel::kTreatment), read(Channel::kTreatmentType),
                      read(Channel::kCostType), read(Channel::kBenefitType)};
}

int VisitRecord::token(Channel channel) const {
  switch (channel) {
    case Channel::kTreatment:
      return treatment_id;
    case Channel::kTreatmentType:
      return treatment_type_id;
    case Channel::kCostType:
      return cost_type_id;
    case Channel::kBenefitType:
      return benefit_type_id;
  }
  return 0;
}

std::vector<double> encode_general(const GeneralFeatures& g, int insurance_categories) {
  if (g.insurance_type < 0 || g.insurance_type >= insurance_categories) {
    throw VocabularyError("insurance_type " + std::to_string(g.insurance_type) + " outside [0, " +
                          std::to_string(insurance_categories) + ")");
  }
  std::vector<double> out(static_cast<std::size_t>(general_width(insurance_categories)), 0.0);
  out[0] = g.age / 100.0;
  out[1] = g.sex == 0 ? 1.0 : 0.0;
  out[2] = g.sex == 0 ? 0.0 : 1.0;
  out[3 + static_cast<std::size_t>(g.insurance_type)] = 1.0;
  out.back() = std::log1p(std::max(0.0, g.total_invoice)) / 10.0;
  return out;
}

std::vector<int> PatientSequence::tokens(Channel channel) const {
  std::vector<int> out;
  out.reserve(visits.size());
  for (const auto& v : visits) out.push_back(v.token(channel));
  return out;
}

int padded_length_for(int n) {
  int length = 1;
  while (length < n) length <<= 1;
  return length;
}

PaddedSequence pad_sequence(const PatientSequence& seq) {
  PaddedSequence out;
  out.sequence = seq;
  out.true_length = seq.length();
  const int length = padded_length_for(std::max(1, out.true_length));
  out.sequence.visits.resize(static_cast<std::size_t>(length));
  out.mask.assign(static_cast<std::size_t>(length), false);
  std::fill(out.mask.begin(), out.mask.begin() + out.true_length, true);
  return out;
}

PaddedSequence pad_sequence(const PaddedSequence& padded) {
  PatientSequence real = padded.sequence;
  real.visits.resize(static_cast<std::size_t>(padded.true_length));
  return pad_sequence(real);
}

std::string_view split_name(SplitTag tag) {
  switch (tag) {
    case SplitTag::kAll:
      return "all";
    case SplitTag::kTrain:
      return "train";
    case SplitTag::kValidation:
      return "validation";
    case SplitTag::kTest:
      return "test";
  }
  return "?";
}

bool Dataset::has_labels() const {
  return std::any_of(sequences.begin(), sequences.end(),
                     [](const PatientSequence& s) { return s.fraud_label.has_value(); });
}

int Dataset::insurance_categories() const {
  int max_id = 0;
  for (const auto& s : sequences) max_id = std::max(max_id, s.general.insurance_type);
  return max_id + 1;
}

void Dataset::validate() const {
  for (const auto& s : sequences) {
    if (s.visits.empty()) throw DataError("patient '" + s.patient_id + "' has no visits");
    for (const auto& v : s.visits) {
      for (const Channel c : kAllChannels) {
        const int id = v.token(c);
        if (id < 0 || id > dictionaries.get(c).size()) {
          throw VocabularyError("patient '" + s.patient_id + "': " + std::string(channel_name(c)) +
                                " id " + std::to_string(id) + " outside dictionary of size " +
                                std::to_string(dictionaries.get(c).size()));
        }
      }
    }
  }
}

namespace {

using internal::format_real;
using internal::quote_if_needed;
using internal::split_csv_line;

constexpr std::array<std::string_view, 14> kColumns = {
    "patient_id",   "visit_index",      "treatment",     "treatment_type", "cost_type",
    "benefit_type", "treatment_number", "factor",        "cost",           "age",
    "sex",          "insurance_type",   "total_invoice", "fraud_label"};

enum Column : std::size_t {
  kPatientId,
  kVisitIndex,
  kTreatment,
  kTreatmentType,
  kCostType,
  kBenefitType,
  kTreatmentNumber,
  kFactor,
  kCost,
  kAge,
  kSex,
  kInsuranceType,
  kTotalInvoice,
  kFraudLabel,
};

double parse_real(const std::string& text, std::string_view column, std::size_t line_no) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw DataError("line " + std::to_string(line_no) + ": bad " + std::string(column) +
                    " value '" + text + "'");
  }
  return value;
}

std::int64_t parse_int(const std::string& text, std::string_view column, std::size_t line_no) {
  std::int64_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError("line " + std::to_string(line_no) + ": bad " + std::string(column) +
                    " value '" + text + "'");
  }
  return value;
}

void require_non_negative(double value, std::string_view column, std::size_t line_no) {
  if (value < 0.0) {
    throw DataError("line " + std::to_string(line_no) + ": " + std::string(column) +
                    " must be non-negative");
  }
}

TokenDictionary dictionary_for(Channel c, const std::vector<RawPatient>& patients,
                               const LoadOptions& options) {
  if (options.frozen_dictionaries) return options.frozen_dictionaries->get(c);
  std::set<std::string> seen;
  for (const auto& p : patients) {
    for (const auto& v : p.visits) {
      switch (c) {
        case Channel::kTreatment:
          seen.insert(v.treatment);
          break;
        case Channel::kTreatmentType:
          seen.insert(v.treatment_type);
          break;
        case Channel::kCostType:
          seen.insert(v.cost_type);
          break;
        case Channel::kBenefitType:
          seen.insert(v.benefit_type);
          break;
      }
    }
  }
  return TokenDictionary(std::string(channel_name(c)),
                         std::vector<std::string>(seen.begin(), seen.end()));
}

}  // namespace

Dataset build_dataset(const std::vector<RawPatient>& patients, const LoadOptions& options) {
  Dataset ds;
  ds.dictionaries = Dictionaries{dictionary_for(Channel::kTreatment, patients, options),
                                 dictionary_for(Channel::kTreatmentType, patients, options),
                                 dictionary_for(Channel::kCostType, patients, options),
                                 dictionary_for(Channel::kBenefitType, patients, options)};
  ds.sequences.reserve(patients.size());
  for (const auto& p : patients) {
    if (p.visits.empty()) throw DataError("patient '" + p.patient_id + "' has no visits");
    PatientSequence seq;
    seq.patient_id = p.patient_id;
    seq.general = p.general;
    seq.fraud_label = p.fraud_label;
    seq.visits.reserve(p.visits.size());
    for (const auto& v : p.visits) {
      if (v.cost < 0.0 || v.factor < 0.0 || v.treatment_number < 0) {
        throw DataError("patient '" + p.patient_id + "': negative numeric visit field");
      }
      VisitRecord r;
      r.treatment_id = ds.dictionaries.treatment.id_of(v.treatment);
      r.treatment_type_id = ds.dictionaries.treatment_type.id_of(v.treatment_type);
      r.cost_type_id = ds.dictionaries.cost_type.id_of(v.cost_type);
      r.benefit_type_id = ds.dictionaries.benefit_type.id_of(v.benefit_type);
      r.treatment_number = v.treatment_number;
      r.factor = v.factor;
      r.cost = v.cost;
      seq.visits.push_back(r);
    }
    ds.sequences.push_back(std::move(seq));
  }
  return ds;
}

Dataset read_dataset(std::istream& in, const LoadOptions& options) {
  std::string line;
  if (!std::getline(in, line)) throw EmptyInputError("dataset is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);

  std::array<std::size_t, kColumns.size()> position{};
  for (std::size_t c = 0; c < kColumns.size(); ++c) {
    const auto it = std::find(header.begin(), header.end(), kColumns[c]);
    if (it == header.end()) {
      throw SchemaError("missing column '" + std::string(kColumns[c]) + "'");
    }
    position[c] = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<RawPatient> patients;
  std::unordered_map<std::string, std::size_t> patient_index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw SchemaError("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields, got " +
                        std::to_string(fields.size()));
    }
    auto field = [&](Column c) -> const std::string& { return fields[position[c]]; };

    const std::string& pid = field(kPatientId);
    if (pid.empty()) throw DataError("line " + std::to_string(line_no) + ": empty patient_id");
    auto [it, inserted] = patient_index.emplace(pid, patients.size());
    if (inserted) {
      RawPatient p;
      p.patient_id = pid;
      p.general.age = parse_real(field(kAge), "age", line_no);
      require_non_negative(p.general.age, "age", line_no);
      p.general.sex = static_cast<int>(parse_int(field(kSex), "sex", line_no));
      if (p.general.sex != 0 && p.general.sex != 1) {
        throw DataError("line " + std::to_string(line_no) + ": sex must be 0 or 1");
      }
      p.general.insurance_type =
          static_cast<int>(parse_int(field(kInsuranceType), "insurance_type", line_no));
      if (p.general.insurance_type < 0) {
        throw DataError("line " + std::to_string(line_no) + ": negative insurance_type");
      }
      p.general.total_invoice = parse_real(field(kTotalInvoice), "total_invoice", line_no);
      require_non_negative(p.general.total_invoice, "total_invoice", line_no);
      const std::string& label = field(kFraudLabel);
      if (label == "1") {
        p.fraud_label = true;
      } else if (label == "0") {
        p.fraud_label = false;
      } else if (!label.empty()) {
        throw DataError("line " + std::to_string(line_no) + ": fraud_label must be 0, 1 or empty");
      }
      patients.push_back(std::move(p));
    }
    RawVisit v;
    v.treatment = field(kTreatment);
    v.treatment_type = field(kTreatmentType);
    v.cost_type = field(kCostType);
    v.benefit_type = field(kBenefitType);
    for (const auto* token : {&v.treatment, &v.treatment_type, &v.cost_type, &v.benefit_type}) {
      if (token->empty()) throw DataError("line " + std::to_string(line_no) + ": empty token");
    }
    v.treatment_number = parse_int(field(kTreatmentNumber), "treatment_number", line_no);
    if (v.treatment_number < 0) {
      throw DataError("line " + std::to_string(line_no) +
                      ": treatment_number must be non-negative");
    }
    v.factor = parse_real(field(kFactor), "factor", line_no);
    require_non_negative(v.factor, "factor", line_no);
    v.cost = parse_real(field(kCost), "cost", line_no);
    require_non_negative(v.cost, "cost", line_no);
    parse_int(field(kVisitIndex), "visit_index", line_no);
    patients[it->second].visits.push_back(std::move(v));
  }
  if (patients.empty()) throw EmptyInputError("dataset has a header but no rows");
  return build_dataset(patients, options);
}

Dataset load_dataset(const std::string& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path + "'");
  return read_dataset(in, options);
}

void write_dataset(std::ostream& out, const Dataset& ds) {
  out << kCsvHeader << '\n';
  for (const auto& s : ds.sequences) {
    const std::string general = format_real(s.general.age) + "," + std::to_string(s.general.sex) +
                                "," + std::to_string(s.general.insurance_type) + "," +
                                format_real(s.general.total_invoice) + ",";
    const char* label = !s.fraud_label ? "" : (*s.fraud_label ? "1" : "0");
    for (std::size_t j = 0; j < s.visits.size(); ++j) {
      const auto& v = s.visits[j];
      out << quote_if_needed(s.patient_id) << ',' << j << ','
          << quote_if_needed(ds.dictionaries.treatment.token_of(v.treatment_id)) << ','
          << quote_if_needed(ds.dictionaries.treatment_type.token_of(v.treatment_type_id)) << ','
          << quote_if_needed(ds.dictionaries.cost_type.token_of(v.cost_type_id)) << ','
          << quote_if_needed(ds.dictionaries.benefit_type.token_of(v.benefit_type_id)) << ','
          << v.treatment_number << ',' << format_real(v.factor) << ',' << format_real(v.cost) << ','
          << general << label << '\n';
    }
  }
}

void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset '" + path + "'");
  write_dataset(out, ds);
  if (!out) throw IoError("write failed for '" + path + "'");
}

namespace {

// Nearest integer with exact halves rounded down.
std::size_t round_half_down(double x) {
  const double r = std::ceil(x - 0.5 - 1e-9);
  return r <= 0.0 ? 0 : static_cast<std::size_t>(r);
}

// Largest-remainder apportionment of `total` over strata with the given
// quotas, never exceeding `capacity`.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& quotas,
                                   const std::vector<std::size_t>& capacity) {
  const std::size_t k = quotas.size();
  std::vector<std::size_t> out(k, 0);
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < k; ++s) {
    out[s] = std::min(capacity[s], static_cast<std::size_t>(std::floor(quotas[s] + 1e-9)));
    assigned += out[s];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return (quotas[a] - std::floor(quotas[a] + 1e-9)) > (quotas[b] - std::floor(quotas[b] + 1e-9));
  });
  while (assigned < total) {
    bool progressed = false;
    for (const std::size_t s : order) {
      if (assigned == total) break;
      if (out[s] < capacity[s]) {
        ++out[s];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  return out;
}

}  // namespace

DatasetSplits split_dataset(const Dataset& ds, const SplitFractions& f, std::uint64_t seed) {
  if (f.train < 0.0 || f.validation < 0.0 || f.test < 0.0) {
    throw ConfigError("split fractions must be non-negative");
  }
  if (std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  const std::size_t n = ds.size();
  const std::size_t n_val = round_half_down(f.validation * static_cast<double>(n));
  const std::size_t n_test =
      std::min(n - std::min(n, n_val), round_half_down(f.test * static_cast<double>(n)));

  // Strata: fraud, normal, unlabeled.
  std::vector<std::vector<std::size_t>> strata(3);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& label = ds.sequences[i].fraud_label;
    strata[!label ? 2 : (*label ? 0 : 1)].push_back(i);
  }
  Rng rng(seed);
  for (auto& s : strata) rng.shuffle(s.begin(), s.end());

  std::vector<double> quota_val(3), quota_test(3);
  std::vector<std::size_t> capacity(3);
  for (std::size_t s = 0; s < 3; ++s) {
    const double share =
        n == 0 ? 0.0 : static_cast<double>(strata[s].size()) / static_cast<double>(n);
    quota_val[s] = share * static_cast<double>(n_val);
    quota_test[s] = share * static_cast<double>(n_test);
    capacity[s] = strata[s].size();
  }
  const auto take_val = apportion(n_val, quota_val, capacity);
  for (std::size_t s = 0; s < 3; ++s) capacity[s] -= take_val[s];
  const auto take_test = apportion(n_test, quota_test, capacity);

  std::vector<SplitTag> tag(n, SplitTag::kTrain);
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t r = 0; r < strata[s].size(); ++r) {
      if (r < take_val[s]) {
        tag[strata[s][r]] = SplitTag::kValidation;
      } else if (r < take_val[s] + take_test[s]) {
        tag[strata[s][r]] = SplitTag::kTest;
      }
    }
  }

  DatasetSplits out;
  for (auto* part : {&out.train, &out.validation, &out.test}) part->dictionaries = ds.dictionaries;
  out.train.split = SplitTag::kTrain;
  out.validation.split = SplitTag::kValidation;
  out.test.split = SplitTag::kTest;
  for (std::size_t i = 0; i < n; ++i) {
    switch (tag[i]) {
      case SplitTag::kValidation:
        out.validation.sequences.push_back(ds.sequences[i]);
        break;
      case SplitTag::kTest:
        out.test.sequences.push_back(ds.sequences[i]);
        break;
      default:
        out.train.sequences.push_back(ds.sequences[i]);
        break;
    }
  }
  return out;
}

}  // namespace claimseq::seqdata
