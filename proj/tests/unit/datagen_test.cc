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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <vector>

#include "claimseq/error.h"

namespace claimseq::datagen {
namespace {

GenConfig small_config(std::uint64_t seed = 7) {
  GenConfig c;
  c.num_patients = 1000;
  c.dict_sizes.treatment = 50;
  c.seed = seed;
  return c;
}

std::string to_csv(const seqdata::Dataset& ds) {
  std::ostringstream out;
  seqdata::write_dataset(out, ds);
  return out.str();
}

// Generator index of every treatment in a patient, in visit order.
std::vector<int> generator_treatments(const GeneratorModel& m, const seqdata::Dataset& ds,
                                      const seqdata::PatientSequence& p) {
  std::vector<int> out;
  for (const auto& v : p.visits) {
    out.push_back(m.treatment_index(ds.dictionaries.treatment.token_of(v.treatment_id)));
  }
  return out;
}

// Positions whose treatment is implausible after the preceding visit.
std::vector<int> implausible_positions(const GeneratorModel& m,
                                       const std::vector<int>& treatments) {
  std::vector<int> out;
  for (std::size_t j = 0; j < treatments.size(); ++j) {
    const auto prev = j == 0 ? std::nullopt : std::optional<int>(treatments[j - 1]);
    if (m.implausible(treatments[j], prev)) out.push_back(static_cast<int>(j));
  }
  return out;
}

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

TEST(GenConfig, Validation) {
  GenConfig c = small_config();
  EXPECT_NO_THROW(c.validate());
  c.fraud_rate = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.dict_sizes.cost_type = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.min_length = 10;
  c.max_length = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(GenConfig::paper_shaped().dict_sizes.treatment, 2204);
  EXPECT_EQ(GenConfig::paper_shaped().dict_sizes.treatment_type, 17);
  EXPECT_THROW(parse_fraud_kind("upcoding"), ConfigError);
  for (const auto k : {FraudKind::kSubstitution, FraudKind::kRareInsertion, FraudKind::kShuffle}) {
    EXPECT_EQ(parse_fraud_kind(fraud_kind_name(k)), k);
  }
}

TEST(GeneratorModel, DistributionsAreNormalized) {
  const GeneratorModel m = GeneratorModel::build(small_config());
  EXPECT_EQ(m.num_treatments(), 50);
  EXPECT_EQ(m.num_types(), 17);
  const auto total = [](const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0);
  };
  EXPECT_NEAR(total(m.initial()), 1.0, 1e-12);
  for (int a = 0; a < m.num_types(); ++a) {
    EXPECT_NEAR(total(m.transition(a)), 1.0, 1e-12);
    EXPECT_NEAR(total(m.cost_type_distribution(a)), 1.0, 1e-12);
    EXPECT_NEAR(total(m.benefit_type_distribution(a)), 1.0, 1e-12);
  }
  std::vector<double> per_type(static_cast<std::size_t>(m.num_types()), 0.0);
  for (int k = 0; k < m.num_treatments(); ++k) {
    ASSERT_GE(m.type_of(k), 0);
    ASSERT_LT(m.type_of(k), m.num_types());
    per_type[static_cast<std::size_t>(m.type_of(k))] += m.within_type_weight(k);
  }
  for (const double w : per_type) EXPECT_NEAR(w, 1.0, 1e-12);
  for (const std::optional<int> prev : {std::optional<int>(), std::optional<int>(3)}) {
    EXPECT_NEAR(total(m.conditional(prev)), 1.0, 1e-12);
  }
}

TEST(GeneratorModel, JsonRoundTripAndTokens) {
  const GeneratorModel m = GeneratorModel::build(small_config());
  const GeneratorModel back = GeneratorModel::from_json(m.to_json());
  EXPECT_EQ(back.to_json(), m.to_json());
  for (int k = 0; k < m.num_treatments(); ++k) {
    EXPECT_EQ(m.treatment_index(m.treatment_token(k)), k);
  }
  EXPECT_THROW(m.treatment_index("TR9999"), VocabularyError);
  EXPECT_THROW(m.treatment_index("XX0001"), VocabularyError);
  EXPECT_THROW(GeneratorModel::from_json({{"type_of", 1}}), SchemaError);
}

TEST(GenDataset, ExactFraudCount) {
  const GeneratedData g = gen_dataset(small_config());
  const auto summary = describe_dataset(g.dataset);
  EXPECT_EQ(summary.fraud_count, 15u);
  EXPECT_EQ(summary.labeled_count, 1000u);
  EXPECT_TRUE(g.warnings.empty());
}

TEST(GenDataset, TooFewPatientsForFraudWarns) {
  GenConfig c = small_config();
  c.num_patients = 50;
  const GeneratedData g = gen_dataset(c);
  EXPECT_EQ(describe_dataset(g.dataset).fraud_count, 0u);
  ASSERT_EQ(g.warnings.size(), 1u);
  c.fraud_rate = 0.0;
  EXPECT_TRUE(gen_dataset(c).warnings.empty());
}

TEST(GenDataset, DeterministicPerSeed) {
  const std::string a = to_csv(gen_dataset(small_config(7)).dataset);
  const std::string b = to_csv(gen_dataset(small_config(7)).dataset);
  const std::string c = to_csv(gen_dataset(small_config(8)).dataset);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(GenDataset, SatisfiesDatasetInvariants) {
  GenConfig c = small_config();
  c.min_length = 2;
  c.max_length = 20;
  const GeneratedData g = gen_dataset(c);
  EXPECT_NO_THROW(g.dataset.validate());
  EXPECT_EQ(g.dataset.size(), 1000u);
  for (const auto& p : g.dataset.sequences) {
    EXPECT_GE(p.length(), 2);
    EXPECT_LE(p.length(), 20);
    ASSERT_TRUE(p.fraud_label.has_value());
    double total = 0.0;
    for (const auto& v : p.visits) {
      EXPECT_GE(v.cost, 0.0);
      total += v.cost;
    }
    EXPECT_NEAR(p.general.total_invoice, total, 0.01);
  }
  EXPECT_EQ(g.dataset.sequences.front().patient_id, "P000001");
}

TEST(GenDataset, MeanLengthTracksConfig) {
  GenConfig c = small_config();
  c.num_patients = 4000;
  c.mean_length = 6.0;
  const auto s = describe_dataset(gen_dataset(c).dataset);
  EXPECT_NEAR(static_cast<double>(s.num_visits) / 4000.0, 6.0, 0.3);
}

// Recount of planted substitutions against the generator stored in the
// sidecar, independent of the corruption code.
TEST(GenDataset, SubstitutionRecount) {
  GenConfig c = small_config();
  c.num_patients = 2000;
  c.min_length = 10;
  c.max_length = 10;
  const GeneratedData g = gen_dataset(c);
  const GeneratorModel m = GeneratorModel::from_json(sidecar_json(c, g).at("generator"));
  std::size_t frauds = 0;
  for (std::size_t i = 0; i < g.dataset.size(); ++i) {
    const auto& p = g.dataset.sequences[i];
    const auto found = implausible_positions(m, generator_treatments(m, g.dataset, p));
    if (*p.fraud_label) {
      ++frauds;
      EXPECT_EQ(found.size(), 3u) << p.patient_id;
      EXPECT_EQ(found, g.corrupted_positions[i]) << p.patient_id;
    } else {
      EXPECT_TRUE(found.empty()) << p.patient_id;
      EXPECT_TRUE(g.corrupted_positions[i].empty());
    }
  }
  EXPECT_EQ(frauds, 30u);
}

TEST(GenDataset, CorruptedTokensAreLessLikelyThanTypicalTokens) {
  for (const auto kind : {FraudKind::kSubstitution, FraudKind::kRareInsertion}) {
    GenConfig c = small_config();
    c.fraud_kind = kind;
    c.fraud_rate = 0.05;
    const GeneratedData g = gen_dataset(c);
    std::vector<double> clean, corrupted;
    for (std::size_t i = 0; i < g.dataset.size(); ++i) {
      const auto t = generator_treatments(g.model, g.dataset, g.dataset.sequences[i]);
      const auto& bad = g.corrupted_positions[i];
      for (std::size_t j = 0; j < t.size(); ++j) {
        const auto prev = j == 0 ? std::nullopt : std::optional<int>(t[j - 1]);
        const double p = g.model.treatment_probability(t[j], prev);
        const bool is_bad = std::find(bad.begin(), bad.end(), static_cast<int>(j)) != bad.end();
        (is_bad ? corrupted : clean).push_back(p);
      }
    }
    ASSERT_FALSE(corrupted.empty());
    std::nth_element(clean.begin(), clean.begin() + static_cast<std::ptrdiff_t>(clean.size() / 2),
                     clean.end());
    const double median = clean[clean.size() / 2];
    for (const double p : corrupted) EXPECT_LT(p, median) << fraud_kind_name(kind);
  }
}

TEST(GenDataset, RareInsertionAddsImplausibleVisits) {
  GenConfig c = small_config();
  c.fraud_kind = FraudKind::kRareInsertion;
  const GeneratedData g = gen_dataset(c);
  for (std::size_t i = 0; i < g.dataset.size(); ++i) {
    const auto& pos = g.corrupted_positions[i];
    if (pos.empty()) continue;
    const auto t = generator_treatments(g.model, g.dataset, g.dataset.sequences[i]);
    const int original = static_cast<int>(t.size() - pos.size());
    EXPECT_EQ(static_cast<int>(pos.size()),
              std::max(1, static_cast<int>(std::lround(0.3 * original))));
    for (const int j : pos) {
      const auto prev =
          j == 0 ? std::nullopt : std::optional<int>(t[static_cast<std::size_t>(j - 1)]);
      EXPECT_TRUE(g.model.implausible(t[static_cast<std::size_t>(j)], prev));
    }
  }
}

TEST(GenDataset, ShuffleMovesVisitsAndFallsBackForSingleVisit) {
  GenConfig c = small_config();
  c.fraud_kind = FraudKind::kShuffle;
  c.fraud_rate = 0.1;
  const GeneratedData g = gen_dataset(c);
  std::size_t single = 0;
  for (std::size_t i = 0; i < g.dataset.size(); ++i) {
    const auto& p = g.dataset.sequences[i];
    const auto& pos = g.corrupted_positions[i];
    if (!*p.fraud_label) continue;
    if (p.length() == 1) {
      ++single;
      ASSERT_EQ(pos, std::vector<int>{0});
      EXPECT_TRUE(
          g.model.implausible(generator_treatments(g.model, g.dataset, p)[0], std::nullopt));
    } else {
      EXPECT_EQ(static_cast<int>(pos.size()),
                std::min(p.length(), std::max(2, static_cast<int>(std::lround(0.3 * p.length())))));
    }
  }
  EXPECT_GT(single, 0u);
}

TEST(GenDataset, SidecarListsFraudPositions) {
  const GenConfig c = small_config();
  const GeneratedData g = gen_dataset(c);
  const auto j = sidecar_json(c, g);
  EXPECT_EQ(j.at("config"), gen_config_to_json(c));
  EXPECT_EQ(j.at("fraud").size(), 15u);
  for (std::size_t i = 0; i < g.dataset.size(); ++i) {
    const auto& p = g.dataset.sequences[i];
    if (*p.fraud_label) {
      EXPECT_EQ(j.at("fraud").at(p.patient_id).get<std::vector<int>>(), g.corrupted_positions[i]);
    }
  }
}

TEST(DescribeDataset, TreatmentTypesAreImbalanced) {
  GenConfig c = small_config();
  c.num_patients = 2000;
  const GeneratedData g = gen_dataset(c);
  const auto s = describe_dataset(g.dataset);
  ASSERT_GE(s.num_visits, 10000u);
  const auto& dict = g.dataset.dictionaries.treatment_type;
  std::vector<double> rank, freq;
  for (int a = 0; a < g.model.num_types(); ++a) {
    const auto id = dict.find(g.model.type_token(a));
    rank.push_back(a + 1);
    freq.push_back(id ? static_cast<double>(
                            s.token_counts.at("treatment_type")[static_cast<std::size_t>(*id - 1)])
                      : 0.0);
  }
  std::vector<double> sorted = freq;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[sorted.size() / 2];
  EXPECT_GT(sorted.back() / median, 5.0);
  EXPECT_LT(spearman(rank, freq), -0.9);
}

TEST(DescribeDataset, SinglePatientAndRates) {
  const GeneratedData g = gen_dataset(small_config());
  seqdata::Dataset one = g.dataset;
  one.sequences.resize(1);
  const auto s = describe_dataset(one);
  EXPECT_EQ(s.num_visits, static_cast<std::size_t>(one.sequences[0].length()));
  for (const auto& [name, counts] : s.token_counts) {
    EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), std::size_t{0}), s.num_visits) << name;
  }
  EXPECT_EQ(s.length_histogram.at(one.sequences[0].length()), 1u);

  const auto all = describe_dataset(g.dataset);
  EXPECT_EQ(all.fraud_rate,
            static_cast<double>(all.fraud_count) / static_cast<double>(all.labeled_count));
  const auto json = all.to_json(g.dataset.dictionaries);
  EXPECT_EQ(json.at("fraud_count"), 15);

  seqdata::Dataset empty = g.dataset;
  empty.sequences.clear();
  EXPECT_THROW(describe_dataset(empty), EmptyInputError);
}

}  // namespace
}  // namespace claimseq::datagen
