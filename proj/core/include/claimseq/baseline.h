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
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "claimseq/rng.h"
#include "claimseq/seqdata.h"

namespace claimseq::baseline {

struct SkipGramConfig {
  int embed_size = 32;
  int window = 2;
  int negative_samples = 5;
  int epochs = 5;
  double learning_rate = 0.025;  // decays linearly towards zero
  std::uint64_t seed = 7;

  void validate() const;
};

// Token vectors for ids 1..vocab_size.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(int vocab_size, int dim);

  int vocab_size() const { return vocab_size_; }
  int dim() const { return dim_; }
  // Throws VocabularyError outside 1..vocab_size.
  std::span<const double> row(int id) const;
  std::span<double> row(int id);

 private:
  int vocab_size_ = 0;
  int dim_ = 0;
  std::vector<double> values_;
};

struct SkipGramResult {
  EmbeddingTable embeddings;
  std::vector<double> loss_history;  // mean pair loss per epoch
};

// Skip-gram with negative sampling from the unigram^0.75 distribution.
// Throws EmptyInputError on an empty corpus and DataError when fewer than
// two distinct tokens occur.
SkipGramResult train_skipgram(const std::vector<std::vector<int>>& corpus, int vocab_size,
                              const SkipGramConfig& config);

// Mean of the token vectors. Throws VocabularyError for unknown ids and
// EmptyInputError for an empty sequence.
std::vector<double> embed_sequence(std::span<const int> tokens, const EmbeddingTable& table);

struct IsolationForestConfig {
  int num_trees = 100;
  int subsample_size = 256;
  std::uint64_t seed = 7;

  void validate() const;
};

// H(m): exact sum for m <= 10, ln(m) + Euler-Mascheroni beyond.
double harmonic(int m);
// Average unsuccessful-search path length c(m) = 2H(m-1) - 2(m-1)/m.
double average_path_length(int m);

class IsolationForest {
 public:
  // `keys` give each point a stable identity; the subsample of every tree
  // depends on the keys only, not on the point order. Throws
  // EmptyInputError for fewer than two points.
  static IsolationForest fit(const std::vector<std::vector<double>>& points,
                             std::span<const std::uint64_t> keys,
                             const IsolationForestConfig& config);

  int num_trees() const { return static_cast<int>(trees_.size()); }
  int subsample_size() const { return subsample_; }
  int height_limit() const { return height_limit_; }

  // Mean path length over the trees.
  double expected_path_length(std::span<const double> x) const;
  // 2^(-E[h(x)] / c(psi)).
  double score(std::span<const double> x) const;

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double split = 0.0;
    int left = -1;
    int right = -1;
    int size = 0;
    int depth = 0;
  };
  using Tree = std::vector<Node>;

  int build(Tree& tree, const std::vector<std::vector<double>>& points,
            std::vector<std::size_t>& idx, std::size_t begin, std::size_t end, int depth,
            Rng& rng) const;
  double path_length(const Tree& tree, std::span<const double> x) const;

  std::vector<Tree> trees_;
  int subsample_ = 0;
  int height_limit_ = 0;
  std::size_t dim_ = 0;
};

struct Classification {
  std::vector<bool> flags;
  std::size_t flagged = 0;
  std::optional<std::size_t> true_positives;
  std::optional<double> precision;
  std::optional<double> recall;  // undefined without positives
};

// Flags the ceil(contamination * n) highest scores; ties go to the earlier
// point. Throws ConfigError unless 0 < contamination < 1.
Classification baseline_classify(std::span<const double> scores, const std::vector<bool>* labels,
                                 double contamination);

struct BaselineConfig {
  seqdata::Channel channel = seqdata::Channel::kTreatment;
  SkipGramConfig skipgram;
  IsolationForestConfig forest;
  double contamination = 0.015;
};

struct BaselineResult {
  seqdata::Channel channel = seqdata::Channel::kTreatment;
  std::vector<std::string> patient_ids;
  std::vector<double> scores;  // isolation scores of the scored set
  Classification classification;
  std::optional<double> roc_auc;
  std::optional<double> pr_auc;
  std::vector<double> skipgram_loss;

  nlohmann::json to_json(double contamination) const;
};

// Embeddings and forest are fit on `fit_set`; `score_set` is scored and
// flagged. Patient ids key the forest subsampling.
BaselineResult run_baseline(const seqdata::Dataset& fit_set, const seqdata::Dataset& score_set,
                            const BaselineConfig& config);

}  // namespace claimseq::baseline
