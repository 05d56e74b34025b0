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

#include "claimseq/baseline.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "claimseq/error.h"
#include "claimseq/eval.h"

namespace claimseq::baseline {

void SkipGramConfig::validate() const {
  if (embed_size < 1) throw ConfigError("skip-gram embed_size must be at least 1");
  if (window < 1) throw ConfigError("skip-gram window must be at least 1");
  if (negative_samples < 1) throw ConfigError("skip-gram negative_samples must be at least 1");
  if (epochs < 0) throw ConfigError("skip-gram epochs must be non-negative");
  if (!(learning_rate > 0.0)) throw ConfigError("skip-gram learning_rate must be positive");
}

EmbeddingTable::EmbeddingTable(int vocab_size, int dim)
    : vocab_size_(vocab_size),
      dim_(dim),
      values_(static_cast<std::size_t>(vocab_size) * static_cast<std::size_t>(dim), 0.0) {}

std::span<const double> EmbeddingTable::row(int id) const {
  if (id < 1 || id > vocab_size_) {
    throw VocabularyError("token id " + std::to_string(id) + " outside 1.." +
                          std::to_string(vocab_size_));
  }
  return {values_.data() + static_cast<std::size_t>(id - 1) * static_cast<std::size_t>(dim_),
          static_cast<std::size_t>(dim_)};
}

std::span<double> EmbeddingTable::row(int id) {
  const auto r = std::as_const(*this).row(id);
  return {const_cast<double*>(r.data()), r.size()};
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

SkipGramResult train_skipgram(const std::vector<std::vector<int>>& corpus, int vocab_size,
                              const SkipGramConfig& config) {
  config.validate();
  if (vocab_size < 1) throw ConfigError("skip-gram vocabulary must not be empty");
  std::vector<double> counts(static_cast<std::size_t>(vocab_size), 0.0);
  std::size_t total_tokens = 0;
  for (const auto& seq : corpus) {
    for (const int id : seq) {
      if (id < 1 || id > vocab_size) {
        throw VocabularyError("token id " + std::to_string(id) + " outside the vocabulary");
      }
      counts[static_cast<std::size_t>(id - 1)] += 1.0;
      ++total_tokens;
    }
  }
  if (total_tokens == 0) throw EmptyInputError("skip-gram corpus is empty");
  if (std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }) < 2) {
    throw DataError("degenerate skip-gram corpus: fewer than two distinct tokens");
  }

  const int dim = config.embed_size;
  Rng rng(config.seed);
  SkipGramResult result;
  result.embeddings = EmbeddingTable(vocab_size, dim);
  EmbeddingTable context(vocab_size, dim);
  for (int id = 1; id <= vocab_size; ++id) {
    for (double& v : result.embeddings.row(id)) v = rng.uniform(-0.5, 0.5) / dim;
  }

  std::vector<double> cumulative(counts.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    acc += std::pow(counts[k], 0.75);
    cumulative[k] = acc;
  }
  const auto negative = [&] {
    const double u = rng.uniform() * acc;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<int>(std::min<std::ptrdiff_t>(
               it - cumulative.begin(), static_cast<std::ptrdiff_t>(counts.size()) - 1)) +
           1;
  };

  const double total_steps = static_cast<double>(config.epochs) * static_cast<double>(total_tokens);
  double step = 0.0;
  std::vector<double> center_grad(static_cast<std::size_t>(dim));
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double loss = 0.0;
    std::size_t pairs = 0;
    for (const std::size_t s : order) {
      const auto& seq = corpus[s];
      const int n = static_cast<int>(seq.size());
      for (int i = 0; i < n; ++i, step += 1.0) {
        const double lr = config.learning_rate * std::max(1e-4, 1.0 - step / total_steps);
        auto center = result.embeddings.row(seq[static_cast<std::size_t>(i)]);
        for (int j = std::max(0, i - config.window); j <= std::min(n - 1, i + config.window); ++j) {
          if (j == i) continue;
          const int target = seq[static_cast<std::size_t>(j)];
          std::fill(center_grad.begin(), center_grad.end(), 0.0);
          for (int s_idx = 0; s_idx <= config.negative_samples; ++s_idx) {
            const bool positive = s_idx == 0;
            const int word = positive ? target : negative();
            if (!positive && word == target) continue;
            auto out = context.row(word);
            const double f = sigmoid(dot(center, out));
            loss -= std::log(std::max(positive ? f : 1.0 - f, 1e-300));
            const double g = ((positive ? 1.0 : 0.0) - f) * lr;
            for (int d = 0; d < dim; ++d) {
              center_grad[static_cast<std::size_t>(d)] += g * out[static_cast<std::size_t>(d)];
              out[static_cast<std::size_t>(d)] += g * center[static_cast<std::size_t>(d)];
            }
          }
          for (int d = 0; d < dim; ++d)
            center[static_cast<std::size_t>(d)] += center_grad[static_cast<std::size_t>(d)];
          ++pairs;
        }
      }
    }
    result.loss_history.push_back(pairs == 0 ? 0.0 : loss / static_cast<double>(pairs));
  }
  return result;
}

std::vector<double> embed_sequence(std::span<const int> tokens, const EmbeddingTable& table) {
  if (tokens.empty()) throw EmptyInputError("cannot embed an empty sequence");
  std::vector<double> mean(static_cast<std::size_t>(table.dim()), 0.0);
  for (const int id : tokens) {
    const auto r = table.row(id);
    for (std::size_t d = 0; d < mean.size(); ++d) mean[d] += r[d];
  }
  for (double& v : mean) v /= static_cast<double>(tokens.size());
  return mean;
}

void IsolationForestConfig::validate() const {
  if (num_trees < 1) throw ConfigError("isolation forest needs at least one tree");
  if (subsample_size < 2) throw ConfigError("isolation forest subsample_size must be at least 2");
}

double harmonic(int m) {
  if (m <= 0) return 0.0;
  if (m > 10) return std::log(static_cast<double>(m)) + 0.5772156649;
  double h = 0.0;
  for (int i = 1; i <= m; ++i) h += 1.0 / i;
  return h;
}

double average_path_length(int m) {
  if (m <= 1) return 0.0;
  return 2.0 * harmonic(m - 1) - 2.0 * (m - 1) / static_cast<double>(m);
}

IsolationForest IsolationForest::fit(const std::vector<std::vector<double>>& points,
                                     std::span<const std::uint64_t> keys,
                                     const IsolationForestConfig& config) {
  config.validate();
  if (points.size() < 2) throw EmptyInputError("isolation forest needs at least two points");
  if (keys.size() != points.size()) throw ShapeError("isolation forest: one key per point");
  IsolationForest f;
  f.dim_ = points.front().size();
  for (const auto& p : points) {
    if (p.size() != f.dim_) throw ShapeError("isolation forest: ragged points");
  }
  f.subsample_ = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(config.subsample_size), points.size()));
  f.height_limit_ = static_cast<int>(std::ceil(std::log2(static_cast<double>(f.subsample_))));

  std::vector<std::pair<std::uint64_t, std::size_t>> ranked(points.size());
  for (int t = 0; t < config.num_trees; ++t) {
    const std::uint64_t tree_seed = mix_seed(config.seed, static_cast<std::uint64_t>(t));
    for (std::size_t i = 0; i < points.size(); ++i)
      ranked[i] = {mix_seed(tree_seed, keys[i]), keys[i]};
    std::vector<std::size_t> order(points.size());
    std::iota(order.begin(), order.end(), 0);
    const auto psi = static_cast<std::size_t>(f.subsample_);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(psi), order.end(),
                      [&](std::size_t a, std::size_t b) { return ranked[a] < ranked[b]; });
    order.resize(psi);
    Rng rng(mix_seed(tree_seed, 0x5eed));
    Tree tree;
    f.build(tree, points, order, 0, order.size(), 0, rng);
    f.trees_.push_back(std::move(tree));
  }
  return f;
}

int IsolationForest::build(Tree& tree, const std::vector<std::vector<double>>& points,
                           std::vector<std::size_t>& idx, std::size_t begin, std::size_t end,
                           int depth, Rng& rng) const {
  const int node_id = static_cast<int>(tree.size());
  tree.push_back(Node{});
  tree.back().size = static_cast<int>(end - begin);
  tree.back().depth = depth;
  if (depth >= height_limit_ || end - begin <= 1) return node_id;

  std::vector<std::size_t> candidates;
  std::vector<std::pair<double, double>> ranges;
  for (std::size_t d = 0; d < dim_; ++d) {
    double lo = points[idx[begin]][d];
    double hi = lo;
    for (std::size_t i = begin + 1; i < end; ++i) {
      lo = std::min(lo, points[idx[i]][d]);
      hi = std::max(hi, points[idx[i]][d]);
    }
    if (lo < hi) {
      candidates.push_back(d);
      ranges.emplace_back(lo, hi);
    }
  }
  if (candidates.empty()) return node_id;  // identical points
  const std::size_t pick = rng.below(candidates.size());
  const std::size_t feature = candidates[pick];
  const auto [lo, hi] = ranges[pick];
  // Split in (lo, hi] so both sides are non-empty under x < split.
  const double split = lo + (hi - lo) * (1.0 - rng.uniform());
  const auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                  idx.begin() + static_cast<std::ptrdiff_t>(end),
                                  [&](std::size_t i) { return points[i][feature] < split; }) -
                   idx.begin();
  const int left = build(tree, points, idx, begin, static_cast<std::size_t>(mid), depth + 1, rng);
  const int right = build(tree, points, idx, static_cast<std::size_t>(mid), end, depth + 1, rng);
  Node& node = tree[static_cast<std::size_t>(node_id)];
  node.feature = static_cast<int>(feature);
  node.split = split;
  node.left = left;
  node.right = right;
  return node_id;
}

double IsolationForest::path_length(const Tree& tree, std::span<const double> x) const {
  const Node* node = &tree.front();
  while (node->feature >= 0) {
    const int next =
        x[static_cast<std::size_t>(node->feature)] < node->split ? node->left : node->right;
    node = &tree[static_cast<std::size_t>(next)];
  }
  return node->depth + average_path_length(node->size);
}

double IsolationForest::expected_path_length(std::span<const double> x) const {
  if (x.size() != dim_) throw ShapeError("isolation forest: point dimension mismatch");
  double total = 0.0;
  for (const Tree& tree : trees_) total += path_length(tree, x);
  return total / static_cast<double>(trees_.size());
}

double IsolationForest::score(std::span<const double> x) const {
  return std::exp2(-expected_path_length(x) / average_path_length(subsample_));
}

Classification baseline_classify(std::span<const double> scores, const std::vector<bool>* labels,
                                 double contamination) {
  if (!(contamination > 0.0 && contamination < 1.0)) {
    throw ConfigError("contamination must lie in (0, 1)");
  }
  if (labels && labels->size() != scores.size())
    throw ShapeError("baseline_classify: size mismatch");
  const std::size_t n = scores.size();
  // The small slack keeps products like 0.07 * 100 from rounding up to 8.
  const auto k = std::min(
      n, static_cast<std::size_t>(std::ceil(contamination * static_cast<double>(n) - 1e-9)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  Classification c;
  c.flags.assign(n, false);
  for (std::size_t i = 0; i < k; ++i) c.flags[order[i]] = true;
  c.flagged = k;
  if (labels) {
    std::size_t tp = 0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < n; ++i) {
      positives += (*labels)[i] ? 1 : 0;
      tp += ((*labels)[i] && c.flags[i]) ? 1 : 0;
    }
    c.true_positives = tp;
    if (k > 0) c.precision = static_cast<double>(tp) / static_cast<double>(k);
    if (positives > 0) c.recall = static_cast<double>(tp) / static_cast<double>(positives);
  }
  return c;
}

nlohmann::json BaselineResult::to_json(double contamination) const {
  const auto opt = [](const auto& v) { return v ? nlohmann::json(*v) : nlohmann::json("n/a"); };
  return {{"channel", std::string(seqdata::channel_name(channel))},
          {"contamination", contamination},
          {"flagged", classification.flagged},
          {"precision", opt(classification.precision)},
          {"recall", opt(classification.recall)},
          {"roc_auc", opt(roc_auc)},
          {"pr_auc", opt(pr_auc)},
          {"skipgram_loss", skipgram_loss}};
}

BaselineResult run_baseline(const seqdata::Dataset& fit_set, const seqdata::Dataset& score_set,
                            const BaselineConfig& config) {
  if (fit_set.empty() || score_set.empty()) throw EmptyInputError("baseline needs non-empty data");
  const int vocab = fit_set.dictionaries.get(config.channel).size();
  if (score_set.dictionaries.get(config.channel).size() != vocab) {
    throw VocabularyError("baseline fit and score sets use different dictionaries");
  }
  std::vector<std::vector<int>> corpus;
  for (const auto& s : fit_set.sequences) corpus.push_back(s.tokens(config.channel));
  SkipGramResult sg = train_skipgram(corpus, vocab, config.skipgram);

  const auto embed_all = [&](const seqdata::Dataset& ds, std::vector<std::uint64_t>& keys) {
    std::vector<std::vector<double>> points;
    for (const auto& s : ds.sequences) {
      points.push_back(embed_sequence(s.tokens(config.channel), sg.embeddings));
      keys.push_back(hash_string(s.patient_id));
    }
    return points;
  };
  std::vector<std::uint64_t> fit_keys;
  const auto fit_points = embed_all(fit_set, fit_keys);
  const IsolationForest forest = IsolationForest::fit(fit_points, fit_keys, config.forest);

  BaselineResult r;
  r.channel = config.channel;
  r.skipgram_loss = sg.loss_history;
  std::vector<std::uint64_t> score_keys;
  for (const auto& p : embed_all(score_set, score_keys)) r.scores.push_back(forest.score(p));
  for (const auto& s : score_set.sequences) r.patient_ids.push_back(s.patient_id);

  std::vector<bool> labels;
  const bool labeled = score_set.has_labels();
  if (labeled) {
    for (const auto& s : score_set.sequences) labels.push_back(s.fraud_label.value_or(false));
  }
  r.classification = baseline_classify(r.scores, labeled ? &labels : nullptr, config.contamination);
  if (labeled) {
    const auto preds = eval::make_predictions(r.scores, labels);
    const auto positives = std::count(labels.begin(), labels.end(), true);
    if (positives > 0) r.pr_auc = eval::pr_auc(preds);
    if (positives > 0 && static_cast<std::size_t>(positives) < labels.size())
      r.roc_auc = eval::roc_auc(preds);
  }
  return r;
}

}  // namespace claimseq::baseline
