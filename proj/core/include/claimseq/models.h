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
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "claimseq/autodiff.h"
#include "claimseq/seqdata.h"

namespace claimseq::models {

using seqdata::Channel;

enum class ModelKind { kLstm, kAutoencoder };
std::string_view model_kind_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

enum class Profile { kPaper, kDesk };
std::string_view profile_name(Profile profile);
Profile parse_profile(std::string_view name);

struct TrainingConfig {
  int batch_size = 256;
  int epochs = 100;
  double base_lr = 1e-3;
  double lr_decay = 0.95;
  std::uint64_t seed = 7;
  // Global gradient-norm clip; off unless set.
  std::optional<double> clip_norm;

  void validate() const;
};

// Next-visit LSTM: embeddings of the previous visit's target, cost type and
// benefit type tokens plus the general features, two LSTM layers and a
// dense softmax head over the target dictionary.
struct NextTokenConfig {
  Channel target_channel = Channel::kTreatment;
  int target_embed = 128;
  int cost_type_embed = 16;
  int benefit_type_embed = 16;
  int hidden_size = 128;
  int num_layers = 2;
  TrainingConfig training;

  static NextTokenConfig paper(Channel target);
  static NextTokenConfig desk(Channel target);
  void validate() const;
};

// Sequence autoencoder: bidirectional two-layer LSTM encoder over the target
// channel, two-layer LSTM decoder with dot-product attention over the
// encoder states, teacher forced.
struct AutoencoderConfig {
  Channel target_channel = Channel::kTreatment;
  int embed_size = 128;
  int hidden_size = 128;
  int encoder_layers = 2;
  int decoder_layers = 2;
  bool bidirectional_encoder = true;
  bool attention = true;
  TrainingConfig training{128, 70, 3e-6, 0.95, 7, std::nullopt};

  static AutoencoderConfig paper(Channel target);
  static AutoencoderConfig desk(Channel target);
  void validate() const;
};

using ModelConfig = std::variant<NextTokenConfig, AutoencoderConfig>;

ModelConfig default_config(ModelKind kind, Profile profile, Channel target);
ModelKind config_kind(const ModelConfig& config);
const TrainingConfig& training_config(const ModelConfig& config);
TrainingConfig& training_config(ModelConfig& config);
Channel config_target(const ModelConfig& config);

nlohmann::json config_to_json(const ModelConfig& config);
// Fields absent from `j` keep the values of `base`.
ModelConfig config_from_json(const nlohmann::json& j, const ModelConfig& base);

// Dictionary sizes and encoding widths a model is built for.
struct InputShape {
  int target_classes = 0;
  int cost_type_classes = 0;
  int benefit_type_classes = 0;
  int insurance_categories = 1;

  static InputShape from(const seqdata::Dataset& ds, Channel target);
  int general_width() const { return seqdata::general_width(insurance_categories); }
  bool operator==(const InputShape&) const = default;
};

// Per-position probability vectors over the target dictionary. Entry k of
// row j is the probability of class id k + 1. Masked rows are all zero.
struct ProbabilitySet {
  int num_classes = 0;
  int true_length = 0;
  std::vector<bool> mask;
  std::vector<double> probs;  // mask.size() x num_classes

  int padded_length() const { return static_cast<int>(mask.size()); }
  std::span<const double> row(int j) const {
    return {probs.data() + static_cast<std::size_t>(j) * static_cast<std::size_t>(num_classes),
            static_cast<std::size_t>(num_classes)};
  }
};

// Time-major token and mask arrays for a batch of padded sequences.
struct Batch {
  std::size_t rows = 0;
  std::size_t length = 0;  // max padded length in the batch
  std::vector<int> target;
  std::vector<int> cost_type;
  std::vector<int> benefit_type;
  std::vector<std::uint8_t> mask;
  std::vector<int> true_lengths;
  autodiff::Tensor general;  // rows x general width

  // length = max(min_length, largest padded length of the members).
  static Batch assemble(std::span<const seqdata::PatientSequence* const> sequences, Channel target,
                        const InputShape& shape, std::size_t min_length = 0);

  std::span<const int> target_at(std::size_t t) const { return {target.data() + t * rows, rows}; }
  std::span<const int> cost_type_at(std::size_t t) const {
    return {cost_type.data() + t * rows, rows};
  }
  std::span<const int> benefit_type_at(std::size_t t) const {
    return {benefit_type.data() + t * rows, rows};
  }
  std::span<const std::uint8_t> mask_at(std::size_t t) const {
    return {mask.data() + t * rows, rows};
  }
};

// Recorded forward pass over a batch. probs rows are time-major:
// row t * batch.rows + r is position t of sequence r.
struct BatchOutput {
  autodiff::CrossEntropy ce;
};

class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  virtual ModelKind kind() const = 0;
  virtual const ModelConfig& config() const = 0;
  const InputShape& shape() const { return shape_; }
  Channel target_channel() const { return config_target(config()); }

  virtual std::vector<autodiff::Parameter*> parameters() = 0;
  std::vector<const autodiff::Parameter*> parameters() const;

  // Records the forward pass and the summed cross-entropy of the batch.
  virtual BatchOutput forward(autodiff::Trace& trace, const Batch& batch) const = 0;

  ProbabilitySet predict(const seqdata::PatientSequence& seq) const;
  // Runs the model at the sequence's padded length.
  ProbabilitySet predict(const seqdata::PaddedSequence& seq) const;
  // Batched inference; output order follows the input.
  std::vector<ProbabilitySet> predict(std::span<const seqdata::PatientSequence> seqs,
                                      std::size_t batch_size = 64) const;

 protected:
  explicit SequenceModel(InputShape shape) : shape_(shape) {}

 private:
  void collect(const Batch& batch, const BatchOutput& out, std::size_t row, std::size_t length,
               ProbabilitySet& dst) const;

  InputShape shape_;
};

// Dot-product attention: scores_t = decoder_h . (encoder_t W), softmax over
// the unmasked positions, context = sum_t weight_t * encoder_t.
struct Attention {
  autodiff::Var context;  // B x encoder width
  autodiff::Var weights;  // B x T
};

// `projected[t]` must be encoder_states[t] * W. mask is B x T row-major.
Attention attention_context(autodiff::Trace& t, autodiff::Var decoder_h,
                            std::span<const autodiff::Var> encoder_states,
                            std::span<const autodiff::Var> projected,
                            std::span<const std::uint8_t> mask);

class NextTokenModel final : public SequenceModel {
 public:
  NextTokenModel(const NextTokenConfig& config, const InputShape& shape);

  ModelKind kind() const override { return ModelKind::kLstm; }
  const ModelConfig& config() const override { return config_; }
  std::vector<autodiff::Parameter*> parameters() override;
  BatchOutput forward(autodiff::Trace& trace, const Batch& batch) const override;

 private:
  ModelConfig config_;
  NextTokenConfig cfg_;
  autodiff::Parameter target_embed_;
  autodiff::Parameter cost_embed_;
  autodiff::Parameter benefit_embed_;
  std::vector<autodiff::LstmCellParams> layers_;
  autodiff::Parameter head_weight_;
  autodiff::Parameter head_bias_;
};

class AutoencoderModel final : public SequenceModel {
 public:
  AutoencoderModel(const AutoencoderConfig& config, const InputShape& shape);

  ModelKind kind() const override { return ModelKind::kAutoencoder; }
  const ModelConfig& config() const override { return config_; }
  std::vector<autodiff::Parameter*> parameters() override;
  BatchOutput forward(autodiff::Trace& trace, const Batch& batch) const override;

 private:
  ModelConfig config_;
  AutoencoderConfig cfg_;
  autodiff::Parameter embed_;
  std::vector<autodiff::LstmCellParams> encoder_forward_;
  std::vector<autodiff::LstmCellParams> encoder_backward_;
  std::vector<autodiff::LstmCellParams> decoder_;
  std::vector<autodiff::Parameter> bridge_weight_;
  std::vector<autodiff::Parameter> bridge_bias_;
  autodiff::Parameter attention_weight_;
  autodiff::Parameter head_weight_;
  autodiff::Parameter head_bias_;
};

std::unique_ptr<SequenceModel> make_model(const ModelConfig& config, const InputShape& shape);

struct EpochReport {
  int epoch = 0;
  double learning_rate = 0.0;
  double mean_loss = 0.0;  // per unmasked token
};

struct TrainResult {
  std::vector<double> loss_history;
  std::vector<EpochReport> epochs;
};

using EpochCallback = std::function<void(const EpochReport&)>;

// Adam on the per-token mean cross-entropy of each batch, learning rate
// decayed per epoch. Batches group sequences of equal padded length.
TrainResult train(SequenceModel& model, const seqdata::Dataset& train_set,
                  const EpochCallback& on_epoch = {});

// Checkpoint: {format, version, model_kind, config, shape, seed,
// dictionaries, parameters: [...]}; parameters in declaration order.
struct Checkpoint {
  std::unique_ptr<SequenceModel> model;
  seqdata::Dictionaries dictionaries;
  nlohmann::json metadata;  // free-form (split settings etc.)
};

nlohmann::json checkpoint_to_json(const SequenceModel& model,
                                  const seqdata::Dictionaries& dictionaries,
                                  const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const std::string& path, const SequenceModel& model,
                     const seqdata::Dictionaries& dictionaries,
                     const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint load_checkpoint(const std::string& path);

}  // namespace claimseq::models
