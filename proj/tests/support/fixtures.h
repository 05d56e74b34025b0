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

// Small datasets and model configurations shared by the model, scoring and
// command tests.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "claimseq/models.h"
#include "claimseq/rng.h"
#include "claimseq/seqdata.h"

namespace claimseq::testing {

using models::AutoencoderConfig;
using models::NextTokenConfig;
using seqdata::Dataset;
using seqdata::PatientSequence;

// Dataset over treatment tokens; cost and benefit types alternate between
// two values so those dictionaries are non-trivial.
inline Dataset token_dataset(const std::vector<std::string>& sequences) {
  std::vector<seqdata::RawPatient> patients;
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    seqdata::RawPatient p;
    p.patient_id = "P" + std::to_string(i);
    p.general = {30.0 + static_cast<double>(i % 40), static_cast<int>(i % 2), 0, 250.0};
    for (std::size_t j = 0; j < sequences[i].size(); ++j) {
      const std::string tok(1, sequences[i][j]);
      p.visits.push_back({tok, "T" + tok, j % 2 ? "c1" : "c2", j % 3 ? "b1" : "b2", 1, 1.0, 5.0});
    }
    patients.push_back(std::move(p));
  }
  return seqdata::build_dataset(patients);
}

// Cyclic grammar A -> B -> C -> A with a random first token.
inline std::vector<std::string> cyclic_corpus(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s;
    char c = static_cast<char>('A' + rng.below(3));
    const std::size_t length = 2 + rng.below(7);
    for (std::size_t j = 0; j < length; ++j) {
      s += c;
      c = c == 'C' ? 'A' : static_cast<char>(c + 1);
    }
    out.push_back(s);
  }
  return out;
}

inline NextTokenConfig small_lstm() {
  NextTokenConfig c;
  c.target_embed = 8;
  c.cost_type_embed = 2;
  c.benefit_type_embed = 2;
  c.hidden_size = 16;
  c.training.batch_size = 32;
  c.training.epochs = 3;
  c.training.base_lr = 1e-2;
  c.training.seed = 11;
  return c;
}

inline AutoencoderConfig small_autoencoder() {
  AutoencoderConfig c;
  c.embed_size = 8;
  c.hidden_size = 12;
  c.training.batch_size = 32;
  c.training.epochs = 3;
  c.training.base_lr = 1e-2;
  c.training.seed = 11;
  return c;
}

// Re-pads a sequence to an explicit length.
inline seqdata::PaddedSequence pad_to(const PatientSequence& seq, int length) {
  seqdata::PaddedSequence p = seqdata::pad_sequence(seq);
  p.sequence.visits.resize(static_cast<std::size_t>(length));
  p.mask.resize(static_cast<std::size_t>(length), false);
  return p;
}

// Random probability rows for the first `true_length` of `padded` positions.
inline models::ProbabilitySet random_probs(int classes, int true_length, int padded, Rng& rng) {
  models::ProbabilitySet p;
  p.num_classes = classes;
  p.true_length = true_length;
  p.mask.assign(static_cast<std::size_t>(padded), false);
  p.probs.assign(static_cast<std::size_t>(padded * classes), 0.0);
  for (int j = 0; j < true_length; ++j) {
    p.mask[static_cast<std::size_t>(j)] = true;
    double total = 0.0;
    for (int k = 0; k < classes; ++k) {
      // Cubing spreads the rows from near-uniform to near-one-hot.
      const double u = rng.uniform(1e-3, 1.0);
      p.probs[static_cast<std::size_t>(j * classes + k)] = u * u * u;
      total += u * u * u;
    }
    for (int k = 0; k < classes; ++k) p.probs[static_cast<std::size_t>(j * classes + k)] /= total;
  }
  return p;
}

}  // namespace claimseq::testing
