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

#include "claimseq/datagen.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "claimseq/error.h"
#include "claimseq/rng.h"

namespace claimseq::datagen {

std::string_view fraud_kind_name(FraudKind kind) {
  switch (kind) {
    case FraudKind::kSubstitution:
      return "substitution";
    case FraudKind::kRareInsertion:
      return "rare_insertion";
    case FraudKind::kShuffle:
      return "shuffle";
  }
  return "?";
}

FraudKind parse_fraud_kind(std::string_view name) {
  for (const FraudKind k :
       {FraudKind::kSubstitution, FraudKind::kRareInsertion, FraudKind::kShuffle}) {
    if (fraud_kind_name(k) == name) return k;
  }
  throw ConfigError("unknown fraud kind '" + std::string(name) +
                    "' (expected substitution|rare_insertion|shuffle)");
}

GenConfig GenConfig::paper_shaped() {
  GenConfig c;
  c.dict_sizes.treatment = 2204;
  return c;
}

void GenConfig::validate() const {
  if (num_patients < 0) throw ConfigError("num_patients must be non-negative");
  if (!(fraud_rate >= 0.0 && fraud_rate <= 1.0)) throw ConfigError("fraud_rate must lie in [0, 1]");
  if (!(fraud_intensity > 0.0 && fraud_intensity <= 1.0)) {
    throw ConfigError("fraud_intensity must lie in (0, 1]");
  }
  if (dict_sizes.treatment < 2 || dict_sizes.treatment_type < 2 || dict_sizes.cost_type < 2 ||
      dict_sizes.benefit_type < 2) {
    throw ConfigError("dictionary sizes must be at least 2");
  }
  if (dict_sizes.treatment < dict_sizes.treatment_type) {
    throw ConfigError("need at least one treatment per treatment type");
  }
  if (min_length < 1 || max_length < min_length) throw ConfigError("invalid length range");
  if (!(mean_length >= 1.0)) throw ConfigError("mean_length must be at least 1");
  if (!(zipf_exponent > 0.0)) throw ConfigError("zipf_exponent must be positive");
}

namespace {

std::size_t sample_index(const std::vector<double>& weights, Rng& rng) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return 0;
}

void normalize(std::vector<double>& w) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& v : w) v /= total;
}

std::string padded_number(int value, int width) {
  std::string s = std::to_string(value);
  if (static_cast<int>(s.size()) < width)
    s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return s;
}

double round_cents(double x) { return std::round(x * 100.0) / 100.0; }

}  // namespace

GeneratorModel GeneratorModel::build(const GenConfig& config) {
  config.validate();
  Rng rng(mix_seed(config.seed, 1));
  const auto n_types = static_cast<std::size_t>(config.dict_sizes.treatment_type);
  const auto n_treat = static_cast<std::size_t>(config.dict_sizes.treatment);
  GeneratorModel m;
  m.token_width_ = std::max(4, static_cast<int>(std::to_string(n_treat).size()));

  std::vector<double> popularity(n_types);
  for (std::size_t a = 0; a < n_types; ++a) {
    popularity[a] = 1.0 / std::pow(static_cast<double>(a + 1), config.zipf_exponent);
  }

  m.type_of_.resize(n_treat);
  m.within_weight_.resize(n_treat);
  std::vector<double> type_totals(n_types, 0.0);
  for (std::size_t k = 0; k < n_treat; ++k) {
    const std::size_t type = k % n_types;
    const std::size_t rank = k / n_types;
    m.type_of_[k] = static_cast<int>(type);
    m.within_weight_[k] = 1.0 / std::pow(static_cast<double>(rank + 1), config.zipf_exponent);
    type_totals[type] += m.within_weight_[k];
  }
  for (std::size_t k = 0; k < n_treat; ++k) m.within_weight_[k] /= type_totals[m.type_of_[k]];

  // First visits come from the most popular types only, so an unusual first
  // visit is implausible too; this only shifts mass further toward the head.
  const auto entry_types = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::lround(0.35 * static_cast<double>(n_types))));
  m.initial_.assign(n_types, 0.0);
  for (std::size_t a = 0; a < std::min(entry_types, n_types); ++a) m.initial_[a] = popularity[a];
  normalize(m.initial_);

  // The chain is a sum of directed cycle flows. Level k adds random cycles
  // through the k most popular types; levels are geometric in k and weighted
  // so each type's cycle throughput never exceeds its popularity, the rest
  // becoming a self-loop. Row and column sums of the flow both equal the
  // popularity, which makes it stationary while rows stay sparse and
  // successor sets differ from predecessor sets.
  const double num_levels = std::max(1.0, std::round(std::log2(static_cast<double>(n_types))));
  std::vector<std::size_t> levels;
  for (int j = 1; j <= static_cast<int>(num_levels); ++j) {
    const double k = std::round(std::pow(static_cast<double>(n_types), j / num_levels));
    levels.push_back(std::clamp<std::size_t>(static_cast<std::size_t>(k), 2, n_types));
  }
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  std::vector<std::vector<double>> flow(n_types, std::vector<double>(n_types, 0.0));
  for (std::size_t j = 0; j < levels.size(); ++j) {
    const std::size_t k = levels[j];
    const double below = j + 1 < levels.size() ? popularity[levels[j + 1] - 1] : 0.0;
    const std::size_t cycles = k == 2 ? 1 : 2;
    const double weight = (popularity[k - 1] - below) / static_cast<double>(cycles);
    for (std::size_t c = 0; c < cycles; ++c) {
      std::vector<std::size_t> order(k);
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(order.begin(), order.end());
      for (std::size_t i = 0; i < k; ++i) flow[order[i]][order[(i + 1) % k]] += weight;
    }
  }
  m.transition_.assign(n_types, std::vector<double>(n_types, 0.0));
  for (std::size_t a = 0; a < n_types; ++a) {
    const double through = std::accumulate(flow[a].begin(), flow[a].end(), 0.0);
    // Snap roundoff so exhausted types get no self-loop.
    const double rest = popularity[a] - through;
    if (rest > 1e-12 * popularity[a]) flow[a][a] += rest;
    for (std::size_t b = 0; b < n_types; ++b) m.transition_[a][b] = flow[a][b] / popularity[a];
    normalize(m.transition_[a]);
  }

  const auto n_cost = static_cast<std::size_t>(config.dict_sizes.cost_type);
  const auto n_benefit = static_cast<std::size_t>(config.dict_sizes.benefit_type);
  for (std::size_t a = 0; a < n_types; ++a) {
    std::vector<double> cost(n_cost, 0.3 / static_cast<double>(n_cost));
    cost[a % n_cost] += 0.7;
    m.cost_type_dist_.push_back(cost);
    std::vector<double> benefit(n_benefit, 0.3 / static_cast<double>(n_benefit));
    benefit[(3 * a + 1) % n_benefit] += 0.7;
    m.benefit_type_dist_.push_back(benefit);
  }
  m.cost_mu_.resize(n_treat);
  for (double& mu : m.cost_mu_) mu = 3.0 + 2.0 * rng.uniform();
  return m;
}

double GeneratorModel::treatment_probability(int treatment, std::optional<int> previous) const {
  const int type = type_of(treatment);
  const double p_type = previous ? transition(type_of(*previous))[static_cast<std::size_t>(type)]
                                 : initial_[static_cast<std::size_t>(type)];
  return p_type * within_type_weight(treatment);
}

std::vector<double> GeneratorModel::conditional(std::optional<int> previous) const {
  std::vector<double> out(static_cast<std::size_t>(num_treatments()));
  for (int k = 0; k < num_treatments(); ++k) {
    out[static_cast<std::size_t>(k)] = treatment_probability(k, previous);
  }
  return out;
}

double GeneratorModel::low_probability_threshold(std::optional<int> previous) const {
  auto p = conditional(previous);
  std::sort(p.begin(), p.end());
  const auto rank = static_cast<std::size_t>(std::floor(0.10 * static_cast<double>(p.size() - 1)));
  return p[rank];
}

bool GeneratorModel::implausible(int treatment, std::optional<int> previous) const {
  return treatment_probability(treatment, previous) <= low_probability_threshold(previous);
}

std::string GeneratorModel::treatment_token(int treatment) const {
  return "TR" + padded_number(treatment + 1, token_width_);
}
std::string GeneratorModel::type_token(int type) const { return "TT" + padded_number(type + 1, 2); }
std::string GeneratorModel::cost_type_token(int c) const { return "CT" + padded_number(c + 1, 2); }
std::string GeneratorModel::benefit_type_token(int b) const {
  return "BT" + padded_number(b + 1, 2);
}

int GeneratorModel::treatment_index(std::string_view token) const {
  if (token.size() > 2 && token.substr(0, 2) == "TR") {
    int value = 0;
    for (const char c : token.substr(2)) {
      if (c < '0' || c > '9') throw VocabularyError("not a treatment token: " + std::string(token));
      value = value * 10 + (c - '0');
    }
    if (value >= 1 && value <= num_treatments()) return value - 1;
  }
  throw VocabularyError("unknown treatment token '" + std::string(token) + "'");
}

nlohmann::json GeneratorModel::to_json() const {
  return {{"type_of", type_of_},
          {"within_type_weight", within_weight_},
          {"initial", initial_},
          {"transition", transition_},
          {"cost_type_distribution", cost_type_dist_},
          {"benefit_type_distribution", benefit_type_dist_},
          {"cost_log_mean", cost_mu_},
          {"cost_log_sd", cost_sigma_},
          {"token_width", token_width_}};
}

GeneratorModel GeneratorModel::from_json(const nlohmann::json& j) {
  GeneratorModel m;
  try {
    m.type_of_ = j.at("type_of").get<std::vector<int>>();
    m.within_weight_ = j.at("within_type_weight").get<std::vector<double>>();
    m.initial_ = j.at("initial").get<std::vector<double>>();
    m.transition_ = j.at("transition").get<std::vector<std::vector<double>>>();
    m.cost_type_dist_ = j.at("cost_type_distribution").get<std::vector<std::vector<double>>>();
    m.benefit_type_dist_ =
        j.at("benefit_type_distribution").get<std::vector<std::vector<double>>>();
    m.cost_mu_ = j.at("cost_log_mean").get<std::vector<double>>();
    m.cost_sigma_ = j.at("cost_log_sd").get<double>();
    m.token_width_ = j.at("token_width").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed generator model: ") + e.what());
  }
  return m;
}

namespace {

struct Visit {
  int treatment = 0;
  int cost_type = 0;
  int benefit_type = 0;
  std::int64_t treatment_number = 1;
  double factor = 1.0;
  double cost = 0.0;
};

int sample_length(const GenConfig& c, Rng& rng) {
  // Geometric on {1, 2, ...} with mean `mean_length`, redrawn until it
  // falls in [min_length, max_length].
  const double p = 1.0 / c.mean_length;
  for (;;) {
    int length = 1;
    if (p < 1.0) {
      const double u = rng.uniform();
      length = 1 + static_cast<int>(std::floor(std::log1p(-u) / std::log1p(-p)));
    }
    if (length >= c.min_length && length <= c.max_length) return length;
  }
}

Visit sample_visit_details(const GeneratorModel& m, int treatment, Rng& rng) {
  static constexpr double kFactors[] = {1.0, 1.15, 2.3, 3.5};
  Visit v;
  v.treatment = treatment;
  const int type = m.type_of(treatment);
  v.cost_type = static_cast<int>(sample_index(m.cost_type_distribution(type), rng));
  v.benefit_type = static_cast<int>(sample_index(m.benefit_type_distribution(type), rng));
  v.treatment_number = 1 + static_cast<std::int64_t>(rng.below(3));
  v.factor = kFactors[rng.below(4)];
  v.cost = round_cents(std::exp(m.cost_log_mean(treatment) + m.cost_log_sd() * rng.normal()));
  return v;
}

std::vector<Visit> sample_normal(const GeneratorModel& m, int length, Rng& rng) {
  std::vector<Visit> visits;
  std::optional<int> prev;
  for (int j = 0; j < length; ++j) {
    const auto& type_dist = prev ? m.transition(m.type_of(*prev)) : m.initial();
    const int type = static_cast<int>(sample_index(type_dist, rng));
    std::vector<double> within(static_cast<std::size_t>(m.num_treatments()), 0.0);
    for (int k = 0; k < m.num_treatments(); ++k) {
      if (m.type_of(k) == type) within[static_cast<std::size_t>(k)] = m.within_type_weight(k);
    }
    const int treatment = static_cast<int>(sample_index(within, rng));
    visits.push_back(sample_visit_details(m, treatment, rng));
    prev = treatment;
  }
  return visits;
}

// A treatment implausible after `previous` whose successor `next` stays
// plausible, so exactly the corrupted visit becomes implausible.
int pick_implausible(const GeneratorModel& m, std::optional<int> previous, std::optional<int> next,
                     Rng& rng) {
  std::vector<int> strict, loose;
  for (int k = 0; k < m.num_treatments(); ++k) {
    if (!m.implausible(k, previous)) continue;
    loose.push_back(k);
    if (!next || !m.implausible(*next, k)) strict.push_back(k);
  }
  const auto& pool = !strict.empty() ? strict : loose;
  if (pool.empty()) {
    // Degenerate generator (every type reachable); take the least likely.
    const auto p = m.conditional(previous);
    return static_cast<int>(std::min_element(p.begin(), p.end()) - p.begin());
  }
  return pool[rng.below(pool.size())];
}

std::vector<int> choose_positions(int length, int count, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(length));
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx.begin(), idx.end());
  idx.resize(static_cast<std::size_t>(std::min(count, length)));
  std::sort(idx.begin(), idx.end());
  return idx;
}

int corrupted_count(double intensity, int length) {
  return std::max(1, static_cast<int>(std::lround(intensity * static_cast<double>(length))));
}

bool only_positions_implausible(const GeneratorModel& m, const std::vector<Visit>& visits,
                                const std::vector<int>& positions) {
  std::vector<int> found;
  for (std::size_t j = 0; j < visits.size(); ++j) {
    const auto prev = j > 0 ? std::optional<int>(visits[j - 1].treatment) : std::nullopt;
    if (m.implausible(visits[j].treatment, prev)) found.push_back(static_cast<int>(j));
  }
  return found == positions;
}

std::vector<int> substitute(const GeneratorModel& m, std::vector<Visit>& visits, double intensity,
                            Rng& rng) {
  const int length = static_cast<int>(visits.size());
  // Some contexts admit no replacement that keeps the following visit
  // plausible; redraw the positions a bounded number of times.
  constexpr int kAttempts = 32;
  const std::vector<Visit> original = visits;
  std::vector<int> positions;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    visits = original;
    positions = choose_positions(length, corrupted_count(intensity, length), rng);
    const std::set<int> chosen(positions.begin(), positions.end());
    for (const int j : positions) {
      const auto prev = j > 0
                            ? std::optional<int>(visits[static_cast<std::size_t>(j - 1)].treatment)
                            : std::nullopt;
      std::optional<int> next;
      if (j + 1 < length && !chosen.count(j + 1))
        next = visits[static_cast<std::size_t>(j + 1)].treatment;
      visits[static_cast<std::size_t>(j)].treatment = pick_implausible(m, prev, next, rng);
    }
    if (only_positions_implausible(m, visits, positions)) break;
  }
  return positions;
}

std::vector<int> insert_rare(const GeneratorModel& m, std::vector<Visit>& visits, double intensity,
                             Rng& rng) {
  const int count = corrupted_count(intensity, static_cast<int>(visits.size()));
  // Slots are gaps 0..T of the original sequence; a gap may take several
  // inserted visits.
  std::vector<int> slots(static_cast<std::size_t>(count));
  for (int& s : slots) s = static_cast<int>(rng.below(visits.size() + 1));
  std::sort(slots.begin(), slots.end());
  std::vector<Visit> merged;
  std::vector<bool> inserted;
  std::size_t next_slot = 0;
  for (std::size_t gap = 0; gap <= visits.size(); ++gap) {
    while (next_slot < slots.size() && slots[next_slot] == static_cast<int>(gap)) {
      merged.emplace_back();
      inserted.push_back(true);
      ++next_slot;
    }
    if (gap < visits.size()) {
      merged.push_back(visits[gap]);
      inserted.push_back(false);
    }
  }
  // Fill left to right so each inserted visit sees its final predecessor;
  // only a following original visit is kept plausible.
  std::vector<int> positions;
  for (std::size_t j = 0; j < merged.size(); ++j) {
    if (!inserted[j]) continue;
    const auto prev = j > 0 ? std::optional<int>(merged[j - 1].treatment) : std::nullopt;
    std::optional<int> next;
    if (j + 1 < merged.size() && !inserted[j + 1]) next = merged[j + 1].treatment;
    merged[j] = sample_visit_details(m, pick_implausible(m, prev, next, rng), rng);
    merged[j].cost = round_cents(merged[j].cost * 5.0);
    positions.push_back(static_cast<int>(j));
  }
  visits = std::move(merged);
  return positions;
}

std::vector<int> shuffle_visits(std::vector<Visit>& visits, double intensity, Rng& rng) {
  const int length = static_cast<int>(visits.size());
  const int count = std::min(length, std::max(2, corrupted_count(intensity, length)));
  const auto positions = choose_positions(length, count, rng);
  // Cyclic rotation moves every chosen visit.
  const Visit first = visits[static_cast<std::size_t>(positions.front())];
  for (std::size_t i = 0; i + 1 < positions.size(); ++i) {
    visits[static_cast<std::size_t>(positions[i])] =
        visits[static_cast<std::size_t>(positions[i + 1])];
  }
  visits[static_cast<std::size_t>(positions.back())] = first;
  return positions;
}

}  // namespace

GeneratedData gen_dataset(const GenConfig& config) {
  config.validate();
  GeneratedData out;
  out.model = GeneratorModel::build(config);
  const GeneratorModel& m = out.model;
  const auto n = static_cast<std::size_t>(config.num_patients);

  std::size_t n_fraud = 0;
  const double expected = config.fraud_rate * static_cast<double>(n);
  if (config.fraud_rate > 0.0 && expected < 1.0) {
    out.warnings.push_back("fraud_rate * num_patients < 1: no fraud patients generated");
  } else {
    n_fraud = static_cast<std::size_t>(std::llround(expected));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng selector(mix_seed(config.seed, 3));
  selector.shuffle(order.begin(), order.end());
  std::vector<bool> is_fraud(n, false);
  for (std::size_t i = 0; i < n_fraud; ++i) is_fraud[order[i]] = true;

  std::vector<seqdata::RawPatient> raw(n);
  out.corrupted_positions.resize(n);
  const int id_width = std::max(6, static_cast<int>(std::to_string(n).size()));
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(config.seed, 1'000'000 + i));
    auto visits = sample_normal(m, sample_length(config, rng), rng);
    seqdata::RawPatient& p = raw[i];
    p.patient_id = "P" + padded_number(static_cast<int>(i + 1), id_width);
    p.general.age = std::round(rng.uniform(0.0, 90.0));
    p.general.sex = static_cast<int>(rng.below(2));
    p.general.insurance_type = static_cast<int>(rng.below(3));
    p.fraud_label = is_fraud[i];
    if (is_fraud[i]) {
      Rng fraud_rng(mix_seed(config.seed, 2'000'000 + i));
      FraudKind kind = config.fraud_kind;
      if (kind == FraudKind::kShuffle && visits.size() < 2) kind = FraudKind::kSubstitution;
      switch (kind) {
        case FraudKind::kSubstitution:
          out.corrupted_positions[i] = substitute(m, visits, config.fraud_intensity, fraud_rng);
          break;
        case FraudKind::kRareInsertion:
          out.corrupted_positions[i] = insert_rare(m, visits, config.fraud_intensity, fraud_rng);
          break;
        case FraudKind::kShuffle:
          out.corrupted_positions[i] = shuffle_visits(visits, config.fraud_intensity, fraud_rng);
          break;
      }
    }
    double total = 0.0;
    for (const Visit& v : visits) {
      seqdata::RawVisit rv;
      rv.treatment = m.treatment_token(v.treatment);
      rv.treatment_type = m.type_token(m.type_of(v.treatment));
      rv.cost_type = m.cost_type_token(v.cost_type);
      rv.benefit_type = m.benefit_type_token(v.benefit_type);
      rv.treatment_number = v.treatment_number;
      rv.factor = v.factor;
      rv.cost = v.cost;
      total += v.cost;
      p.visits.push_back(std::move(rv));
    }
    p.general.total_invoice = round_cents(total);
  }
  out.dataset = seqdata::build_dataset(raw);
  return out;
}

nlohmann::json gen_config_to_json(const GenConfig& c) {
  return {{"num_patients", c.num_patients},
          {"dict_sizes",
           {{"treatment", c.dict_sizes.treatment},
            {"treatment_type", c.dict_sizes.treatment_type},
            {"cost_type", c.dict_sizes.cost_type},
            {"benefit_type", c.dict_sizes.benefit_type}}},
          {"mean_length", c.mean_length},
          {"min_length", c.min_length},
          {"max_length", c.max_length},
          {"fraud_rate", c.fraud_rate},
          {"fraud_kind", std::string(fraud_kind_name(c.fraud_kind))},
          {"fraud_intensity", c.fraud_intensity},
          {"zipf_exponent", c.zipf_exponent},
          {"seed", c.seed}};
}

nlohmann::json sidecar_json(const GenConfig& config, const GeneratedData& data) {
  nlohmann::json fraud = nlohmann::json::object();
  for (std::size_t i = 0; i < data.dataset.sequences.size(); ++i) {
    const auto& s = data.dataset.sequences[i];
    if (s.fraud_label.value_or(false)) fraud[s.patient_id] = data.corrupted_positions[i];
  }
  return {{"config", gen_config_to_json(config)},
          {"generator", data.model.to_json()},
          {"fraud", fraud},
          {"warnings", data.warnings}};
}

DatasetSummary describe_dataset(const seqdata::Dataset& ds) {
  if (ds.empty()) throw EmptyInputError("cannot describe an empty dataset");
  DatasetSummary s;
  s.num_patients = ds.size();
  for (const seqdata::Channel c : seqdata::kAllChannels) {
    s.token_counts[std::string(seqdata::channel_name(c))].assign(
        static_cast<std::size_t>(ds.dictionaries.get(c).size()), 0);
  }
  for (const auto& p : ds.sequences) {
    s.num_visits += p.visits.size();
    ++s.length_histogram[p.length()];
    if (p.fraud_label) {
      ++s.labeled_count;
      if (*p.fraud_label) ++s.fraud_count;
    }
    for (const auto& v : p.visits) {
      for (const seqdata::Channel c : seqdata::kAllChannels) {
        const int id = v.token(c);
        if (id > 0)
          ++s.token_counts[std::string(seqdata::channel_name(c))][static_cast<std::size_t>(id - 1)];
      }
    }
  }
  s.fraud_rate = s.labeled_count == 0
                     ? 0.0
                     : static_cast<double>(s.fraud_count) / static_cast<double>(s.labeled_count);
  return s;
}

nlohmann::json DatasetSummary::to_json(const seqdata::Dictionaries& dictionaries) const {
  nlohmann::json lengths = nlohmann::json::object();
  for (const auto& [length, count] : length_histogram) lengths[std::to_string(length)] = count;
  nlohmann::json channels = nlohmann::json::object();
  for (const auto& [name, counts] : token_counts) {
    const auto& dict = dictionaries.get(seqdata::parse_channel(name));
    nlohmann::json hist = nlohmann::json::object();
    for (std::size_t i = 0; i < counts.size(); ++i) {
      hist[dict.token_of(static_cast<int>(i) + 1)] = counts[i];
    }
    channels[name] = hist;
  }
  return {{"num_patients", num_patients}, {"num_visits", num_visits},
          {"fraud_count", fraud_count},   {"labeled_count", labeled_count},
          {"fraud_rate", fraud_rate},     {"length_histogram", lengths},
          {"token_counts", channels}};
}

}  // namespace claimseq::datagen
