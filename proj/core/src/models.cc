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

#include "claimseq/models.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "claimseq/error.h"
#include "claimseq/rng.h"

namespace claimseq::models {

using autodiff::CrossEntropy;
using autodiff::LstmCellParams;
using autodiff::LstmState;
using autodiff::Parameter;
using autodiff::Tensor;
using autodiff::Trace;
using autodiff::Var;

std::string_view model_kind_name(ModelKind kind) {
  return kind == ModelKind::kLstm ? "lstm" : "autoencoder";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "lstm") return ModelKind::kLstm;
  if (name == "autoencoder") return ModelKind::kAutoencoder;
  throw ConfigError("unknown model kind '" + std::string(name) + "' (expected lstm|autoencoder)");
}

std::string_view profile_name(Profile profile) {
  return profile == Profile::kPaper ? "paper" : "desk";
}

Profile parse_profile(std::string_view name) {
  if (name == "paper") return Profile::kPaper;
  if (name == "desk") return Profile::kDesk;
  throw ConfigError("unknown profile '" + std::string(name) + "' (expected paper|desk)");
}

void TrainingConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw ConfigError("base_lr must be positive");
  if (!(lr_decay > 0.0) || lr_decay > 1.0) throw ConfigError("lr_decay must lie in (0, 1]");
  if (clip_norm && !(*clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
}

NextTokenConfig NextTokenConfig::paper(Channel target) {
  NextTokenConfig c;
  c.target_channel = target;
  c.target_embed = target == Channel::kTreatmentType ? 32 : 128;
  c.training = TrainingConfig{256, 100, 1e-3, 0.95, 7, std::nullopt};
  return c;
}

NextTokenConfig NextTokenConfig::desk(Channel target) {
  NextTokenConfig c;
  c.target_channel = target;
  c.target_embed = 32;
  c.cost_type_embed = 8;
  c.benefit_type_embed = 8;
  c.hidden_size = 64;
  c.training = TrainingConfig{32, 20, 5e-3, 0.95, 7, std::nullopt};
  return c;
}

void NextTokenConfig::validate() const {
  if (target_channel != Channel::kTreatment && target_channel != Channel::kTreatmentType) {
    throw ConfigError("target channel must be treatment or treatment_type");
  }
  if (target_embed < 1 || cost_type_embed < 1 || benefit_type_embed < 1) {
    throw ConfigError("embedding sizes must be positive");
  }
  if (hidden_size < 1) throw ConfigError("hidden_size must be positive");
  if (num_layers != 2) throw ConfigError("the next-visit LSTM uses exactly 2 layers");
  training.validate();
}

AutoencoderConfig AutoencoderConfig::paper(Channel target) {
  AutoencoderConfig c;
  c.target_channel = target;
  c.training = TrainingConfig{128,  70, target == Channel::kTreatmentType ? 1e-6 : 3e-6,
                              0.95, 7,  std::nullopt};
  return c;
}

AutoencoderConfig AutoencoderConfig::desk(Channel target) {
  AutoencoderConfig c;
  c.target_channel = target;
  c.embed_size = 32;
  c.hidden_size = 64;
  c.training = TrainingConfig{32, 20, 5e-3, 0.95, 7, std::nullopt};
  return c;
}

void AutoencoderConfig::validate() const {
  if (target_channel != Channel::kTreatment && target_channel != Channel::kTreatmentType) {
    throw ConfigError("target channel must be treatment or treatment_type");
  }
  if (embed_size < 1 || hidden_size < 1) throw ConfigError("sizes must be positive");
  if (encoder_layers != 2 || decoder_layers != 2) {
    throw ConfigError("the autoencoder uses 2 encoder and 2 decoder layers");
  }
  if (!bidirectional_encoder) throw ConfigError("the autoencoder encoder is bidirectional");
  if (!attention) throw ConfigError("the autoencoder decoder uses attention");
  training.validate();
}

ModelConfig default_config(ModelKind kind, Profile profile, Channel target) {
  if (kind == ModelKind::kLstm) {
    return profile == Profile::kPaper ? NextTokenConfig::paper(target)
                                      : NextTokenConfig::desk(target);
  }
  return profile == Profile::kPaper ? AutoencoderConfig::paper(target)
                                    : AutoencoderConfig::desk(target);
}

ModelKind config_kind(const ModelConfig& config) {
  return std::holds_alternative<NextTokenConfig>(config) ? ModelKind::kLstm
                                                         : ModelKind::kAutoencoder;
}

const TrainingConfig& training_config(const ModelConfig& config) {
  return std::visit([](const auto& c) -> const TrainingConfig& { return c.training; }, config);
}

TrainingConfig& training_config(ModelConfig& config) {
  return std::visit([](auto& c) -> TrainingConfig& { return c.training; }, config);
}

Channel config_target(const ModelConfig& config) {
  return std::visit([](const auto& c) { return c.target_channel; }, config);
}

namespace {

nlohmann::json training_to_json(const TrainingConfig& t) {
  nlohmann::json j = {{"batch_size", t.batch_size},
                      {"epochs", t.epochs},
                      {"base_lr", t.base_lr},
                      {"lr_decay", t.lr_decay},
                      {"seed", t.seed}};
  j["clip_norm"] = t.clip_norm ? nlohmann::json(*t.clip_norm) : nlohmann::json(nullptr);
  return j;
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

TrainingConfig training_from_json(const nlohmann::json& j, TrainingConfig t) {
  read_field(j, "batch_size", t.batch_size);
  read_field(j, "epochs", t.epochs);
  read_field(j, "base_lr", t.base_lr);
  read_field(j, "lr_decay", t.lr_decay);
  read_field(j, "seed", t.seed);
  if (j.contains("clip_norm")) {
    t.clip_norm = j.at("clip_norm").is_null()
                      ? std::nullopt
                      : std::optional<double>(j.at("clip_norm").get<double>());
  }
  return t;
}

}  // namespace

nlohmann::json config_to_json(const ModelConfig& config) {
  if (const auto* c = std::get_if<NextTokenConfig>(&config)) {
    return {{"model_kind", "lstm"},
            {"target_channel", std::string(seqdata::channel_name(c->target_channel))},
            {"target_embed", c->target_embed},
            {"cost_type_embed", c->cost_type_embed},
            {"benefit_type_embed", c->benefit_type_embed},
            {"hidden_size", c->hidden_size},
            {"num_layers", c->num_layers},
            {"training", training_to_json(c->training)}};
  }
  const auto& c = std::get<AutoencoderConfig>(config);
  return {{"model_kind", "autoencoder"},
          {"target_channel", std::string(seqdata::channel_name(c.target_channel))},
          {"embed_size", c.embed_size},
          {"hidden_size", c.hidden_size},
          {"encoder_layers", c.encoder_layers},
          {"decoder_layers", c.decoder_layers},
          {"bidirectional_encoder", c.bidirectional_encoder},
          {"attention", c.attention},
          {"training", training_to_json(c.training)}};
}

ModelConfig config_from_json(const nlohmann::json& j, const ModelConfig& base) {
  try {
    if (j.contains("model_kind") &&
        parse_model_kind(j.at("model_kind").get<std::string>()) != config_kind(base)) {
      throw ConfigError("config model_kind does not match");
    }
    Channel target = config_target(base);
    if (j.contains("target_channel")) {
      target = seqdata::parse_channel(j.at("target_channel").get<std::string>());
    }
    if (const auto* b = std::get_if<NextTokenConfig>(&base)) {
      NextTokenConfig c = *b;
      c.target_channel = target;
      read_field(j, "target_embed", c.target_embed);
      read_field(j, "cost_type_embed", c.cost_type_embed);
      read_field(j, "benefit_type_embed", c.benefit_type_embed);
      read_field(j, "hidden_size", c.hidden_size);
      read_field(j, "num_layers", c.num_layers);
      if (j.contains("training")) c.training = training_from_json(j.at("training"), c.training);
      c.validate();
      return c;
    }
    AutoencoderConfig c = std::get<AutoencoderConfig>(base);
    c.target_channel = target;
    read_field(j, "embed_size", c.embed_size);
    read_field(j, "hidden_size", c.hidden_size);
    read_field(j, "encoder_layers", c.encoder_layers);
    read_field(j, "decoder_layers", c.decoder_layers);
    read_field(j, "bidirectional_encoder", c.bidirectional_encoder);
    read_field(j, "attention", c.attention);
    if (j.contains("training")) c.training = training_from_json(j.at("training"), c.training);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
}

InputShape InputShape::from(const seqdata::Dataset& ds, Channel target) {
  InputShape s;
  s.target_classes = ds.dictionaries.get(target).size();
  s.cost_type_classes = ds.dictionaries.cost_type.size();
  s.benefit_type_classes = ds.dictionaries.benefit_type.size();
  s.insurance_categories = ds.insurance_categories();
  return s;
}

Batch Batch::assemble(std::span<const seqdata::PatientSequence* const> sequences, Channel target,
                      const InputShape& shape, std::size_t min_length) {
  Batch b;
  b.rows = sequences.size();
  b.length = min_length;
  if (b.rows == 0) throw ShapeError("empty batch");
  for (const auto* s : sequences) {
    if (s->visits.empty()) throw DataError("patient '" + s->patient_id + "' has no visits");
    b.length = std::max<std::size_t>(
        b.length, static_cast<std::size_t>(seqdata::padded_length_for(s->length())));
  }
  const std::size_t n = b.rows * b.length;
  b.target.assign(n, 0);
  b.cost_type.assign(n, 0);
  b.benefit_type.assign(n, 0);
  b.mask.assign(n, 0);
  b.general = Tensor(b.rows, static_cast<std::size_t>(shape.general_width()));
  auto check = [](int id, int size, std::string_view channel, const std::string& pid) {
    if (id < 1 || id > size) {
      throw VocabularyError("patient '" + pid + "': " + std::string(channel) + " id " +
                            std::to_string(id) + " outside model dictionary of size " +
                            std::to_string(size));
    }
  };
  for (std::size_t r = 0; r < b.rows; ++r) {
    const auto& s = *sequences[r];
    b.true_lengths.push_back(s.length());
    for (std::size_t t = 0; t < s.visits.size(); ++t) {
      const auto& v = s.visits[t];
      const std::size_t at = t * b.rows + r;
      b.target[at] = v.token(target);
      b.cost_type[at] = v.cost_type_id;
      b.benefit_type[at] = v.benefit_type_id;
      b.mask[at] = 1;
      check(b.target[at], shape.target_classes, seqdata::channel_name(target), s.patient_id);
      check(b.cost_type[at], shape.cost_type_classes, "cost_type", s.patient_id);
      check(b.benefit_type[at], shape.benefit_type_classes, "benefit_type", s.patient_id);
    }
    const auto g = seqdata::encode_general(s.general, shape.insurance_categories);
    std::copy(g.begin(), g.end(), b.general.row(r).begin());
  }
  return b;
}

std::vector<const Parameter*> SequenceModel::parameters() const {
  const auto mutable_params = const_cast<SequenceModel*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

ProbabilitySet SequenceModel::predict(const seqdata::PatientSequence& seq) const {
  return predict(std::span<const seqdata::PatientSequence>(&seq, 1)).front();
}

ProbabilitySet SequenceModel::predict(const seqdata::PaddedSequence& seq) const {
  seqdata::PatientSequence real = seq.sequence;
  real.visits.resize(static_cast<std::size_t>(seq.true_length));
  const seqdata::PatientSequence* members[] = {&real};
  const Batch batch = Batch::assemble(members, target_channel(), shape(),
                                      static_cast<std::size_t>(seq.padded_length()));
  Trace trace(autodiff::GradMode::kInference);
  const BatchOutput result = forward(trace, batch);
  ProbabilitySet out;
  collect(batch, result, 0, batch.length, out);
  return out;
}

void SequenceModel::collect(const Batch& batch, const BatchOutput& result, std::size_t r,
                            std::size_t length, ProbabilitySet& p) const {
  const auto d = static_cast<std::size_t>(shape().target_classes);
  const int true_length = batch.true_lengths[r];
  p.num_classes = static_cast<int>(d);
  p.true_length = true_length;
  p.mask.assign(length, false);
  p.probs.assign(length * d, 0.0);
  for (std::size_t t = 0; t < static_cast<std::size_t>(true_length); ++t) {
    p.mask[t] = true;
    const auto src = result.ce.probs.row(t * batch.rows + r);
    std::copy(src.begin(), src.end(), p.probs.begin() + static_cast<std::ptrdiff_t>(t * d));
  }
}

std::vector<ProbabilitySet> SequenceModel::predict(std::span<const seqdata::PatientSequence> seqs,
                                                   std::size_t batch_size) const {
  std::vector<ProbabilitySet> out(seqs.size());
  // Group by padded length so batches carry little padding; outputs are
  // row-independent, so grouping does not change results.
  std::vector<std::size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return seqs[a].length() < seqs[b].length();
  });
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t stop = std::min(order.size(), start + batch_size);
    std::vector<const seqdata::PatientSequence*> members;
    for (std::size_t k = start; k < stop; ++k) members.push_back(&seqs[order[k]]);
    const Batch batch = Batch::assemble(members, target_channel(), shape());
    Trace trace(autodiff::GradMode::kInference);
    const BatchOutput result = forward(trace, batch);
    for (std::size_t r = 0; r < batch.rows; ++r) {
      const auto length =
          static_cast<std::size_t>(seqdata::padded_length_for(batch.true_lengths[r]));
      collect(batch, result, r, length, out[order[start + r]]);
    }
  }
  return out;
}

Attention attention_context(Trace& t, Var decoder_h, std::span<const Var> encoder_states,
                            std::span<const Var> projected, std::span<const std::uint8_t> mask) {
  if (encoder_states.size() != projected.size() || encoder_states.empty()) {
    throw ShapeError("attention needs one projection per encoder state");
  }
  std::vector<Var> scores;
  scores.reserve(projected.size());
  for (const Var p : projected) scores.push_back(autodiff::rowdot(t, decoder_h, p));
  const Var weights = autodiff::masked_softmax(t, autodiff::concat_cols(t, scores), mask);
  return {autodiff::weighted_sum(t, weights, encoder_states), weights};
}

namespace {

Parameter make_embedding(const std::string& name, int classes, int width, Rng& rng) {
  // Rows: 0 = pad (kept at zero), 1..classes, classes + 1 = begin-of-sequence.
  Parameter p(name, Tensor(static_cast<std::size_t>(classes) + 2, static_cast<std::size_t>(width)));
  for (std::size_t r = 1; r < p.value.rows(); ++r) {
    for (double& v : p.value.row(r)) v = rng.uniform(-0.1, 0.1);
  }
  return p;
}

Parameter make_dense(const std::string& name, std::size_t in, std::size_t out, double limit,
                     Rng& rng) {
  Parameter p(name, Tensor(in, out));
  autodiff::init_uniform(p, limit, rng);
  return p;
}

// ids shifted so that position 0 sees the begin-of-sequence row.
std::vector<int> previous_ids(std::span<const int> ids_prev, std::size_t rows, int bos,
                              bool first) {
  if (first) return std::vector<int>(rows, bos);
  return std::vector<int>(ids_prev.begin(), ids_prev.end());
}

}  // namespace

NextTokenModel::NextTokenModel(const NextTokenConfig& config, const InputShape& shape)
    : SequenceModel(shape), config_(config), cfg_(config) {
  cfg_.validate();
  if (shape.target_classes < 1) throw ConfigError("empty target dictionary");
  Rng rng(mix_seed(cfg_.training.seed, 0));
  target_embed_ = make_embedding("lstm.embed.target", shape.target_classes, cfg_.target_embed, rng);
  cost_embed_ =
      make_embedding("lstm.embed.cost_type", shape.cost_type_classes, cfg_.cost_type_embed, rng);
  benefit_embed_ = make_embedding("lstm.embed.benefit_type", shape.benefit_type_classes,
                                  cfg_.benefit_type_embed, rng);
  const auto hidden = static_cast<std::size_t>(cfg_.hidden_size);
  const auto input = static_cast<std::size_t>(cfg_.target_embed + cfg_.cost_type_embed +
                                              cfg_.benefit_type_embed + shape.general_width());
  for (int l = 0; l < cfg_.num_layers; ++l) {
    layers_.emplace_back("lstm.layer" + std::to_string(l), l == 0 ? input : hidden, hidden);
    layers_.back().initialize(rng);
  }
  const double limit = 1.0 / std::sqrt(static_cast<double>(hidden));
  head_weight_ = make_dense("lstm.head.weight", hidden,
                            static_cast<std::size_t>(shape.target_classes), limit, rng);
  head_bias_ =
      Parameter("lstm.head.bias", Tensor(1, static_cast<std::size_t>(shape.target_classes)));
}

std::vector<Parameter*> NextTokenModel::parameters() {
  std::vector<Parameter*> out = {&target_embed_, &cost_embed_, &benefit_embed_};
  for (auto& layer : layers_) {
    for (Parameter* p : layer.parameters()) out.push_back(p);
  }
  out.push_back(&head_weight_);
  out.push_back(&head_bias_);
  return out;
}

BatchOutput NextTokenModel::forward(Trace& t, const Batch& batch) const {
  const Var target_table = t.param(target_embed_);
  const Var cost_table = t.param(cost_embed_);
  const Var benefit_table = t.param(benefit_embed_);
  const Var general = t.constant(batch.general);
  std::vector<Var> weights, biases;
  for (const auto& layer : layers_) {
    weights.push_back(t.param(layer.weight));
    biases.push_back(t.param(layer.bias));
  }
  std::vector<LstmState> state;
  for (const auto& layer : layers_) state.push_back(layer.zero_state(t, batch.rows));

  const int target_bos = shape().target_classes + 1;
  const int cost_bos = shape().cost_type_classes + 1;
  const int benefit_bos = shape().benefit_type_classes + 1;
  std::vector<Var> outputs;
  outputs.reserve(batch.length);
  for (std::size_t step = 0; step < batch.length; ++step) {
    const bool first = step == 0;
    const std::size_t prev = first ? 0 : step - 1;
    const auto target_ids = previous_ids(batch.target_at(prev), batch.rows, target_bos, first);
    const auto cost_ids = previous_ids(batch.cost_type_at(prev), batch.rows, cost_bos, first);
    const auto benefit_ids =
        previous_ids(batch.benefit_type_at(prev), batch.rows, benefit_bos, first);
    const Var parts[] = {autodiff::embedding(t, target_table, target_ids),
                         autodiff::embedding(t, cost_table, cost_ids),
                         autodiff::embedding(t, benefit_table, benefit_ids), general};
    Var input = autodiff::concat_cols(t, parts);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      state[l] = autodiff::lstm_cell(t, input, state[l], weights[l], biases[l]);
      input = state[l].h;
    }
    outputs.push_back(input);
  }
  const Var hidden = autodiff::concat_rows(t, outputs);
  const Var logits = autodiff::dense(t, hidden, t.param(head_weight_), t.param(head_bias_));
  return {autodiff::softmax_cross_entropy(t, logits, batch.target, batch.mask)};
}

AutoencoderModel::AutoencoderModel(const AutoencoderConfig& config, const InputShape& shape)
    : SequenceModel(shape), config_(config), cfg_(config) {
  cfg_.validate();
  if (shape.target_classes < 1) throw ConfigError("empty target dictionary");
  Rng rng(mix_seed(cfg_.training.seed, 0));
  const auto hidden = static_cast<std::size_t>(cfg_.hidden_size);
  const auto embed = static_cast<std::size_t>(cfg_.embed_size);
  const double limit = 1.0 / std::sqrt(static_cast<double>(hidden));
  embed_ = make_embedding("autoencoder.embed", shape.target_classes, cfg_.embed_size, rng);
  const std::size_t encoder_input = embed + static_cast<std::size_t>(shape.general_width());
  for (int l = 0; l < cfg_.encoder_layers; ++l) {
    const std::size_t in = l == 0 ? encoder_input : 2 * hidden;
    encoder_forward_.emplace_back("autoencoder.encoder.fwd" + std::to_string(l), in, hidden);
    encoder_forward_.back().initialize(rng);
    encoder_backward_.emplace_back("autoencoder.encoder.bwd" + std::to_string(l), in, hidden);
    encoder_backward_.back().initialize(rng);
  }
  for (int l = 0; l < cfg_.decoder_layers; ++l) {
    decoder_.emplace_back("autoencoder.decoder" + std::to_string(l), l == 0 ? embed : hidden,
                          hidden);
    decoder_.back().initialize(rng);
    bridge_weight_.push_back(make_dense("autoencoder.bridge" + std::to_string(l) + ".weight",
                                        2 * hidden, hidden, limit, rng));
    bridge_bias_.emplace_back("autoencoder.bridge" + std::to_string(l) + ".bias",
                              Tensor(1, hidden));
  }
  attention_weight_ = make_dense("autoencoder.attention.weight", 2 * hidden, hidden, limit, rng);
  head_weight_ = make_dense("autoencoder.head.weight", 3 * hidden,
                            static_cast<std::size_t>(shape.target_classes),
                            1.0 / std::sqrt(3.0 * static_cast<double>(hidden)), rng);
  head_bias_ =
      Parameter("autoencoder.head.bias", Tensor(1, static_cast<std::size_t>(shape.target_classes)));
}

std::vector<Parameter*> AutoencoderModel::parameters() {
  std::vector<Parameter*> out = {&embed_};
  for (std::size_t l = 0; l < encoder_forward_.size(); ++l) {
    for (Parameter* p : encoder_forward_[l].parameters()) out.push_back(p);
    for (Parameter* p : encoder_backward_[l].parameters()) out.push_back(p);
  }
  for (std::size_t l = 0; l < decoder_.size(); ++l) {
    for (Parameter* p : decoder_[l].parameters()) out.push_back(p);
    out.push_back(&bridge_weight_[l]);
    out.push_back(&bridge_bias_[l]);
  }
  out.push_back(&attention_weight_);
  out.push_back(&head_weight_);
  out.push_back(&head_bias_);
  return out;
}

BatchOutput AutoencoderModel::forward(Trace& t, const Batch& batch) const {
  const std::size_t rows = batch.rows;
  const std::size_t length = batch.length;
  const Var table = t.param(embed_);
  const Var general = t.constant(batch.general);

  // Encoder: bidirectional layers. The forward direction carries its state
  // through padding; the backward direction stays at zero until it reaches
  // the last real position, so padding never leaks into real positions.
  std::vector<Var> inputs;
  inputs.reserve(length);
  for (std::size_t step = 0; step < length; ++step) {
    const Var parts[] = {autodiff::embedding(t, table, batch.target_at(step)), general};
    inputs.push_back(autodiff::concat_cols(t, parts));
  }
  std::vector<Var> last_forward_h, first_backward_h;
  for (std::size_t l = 0; l < encoder_forward_.size(); ++l) {
    std::vector<Var> fwd(length), bwd(length);
    const Var fw = t.param(encoder_forward_[l].weight), fb = t.param(encoder_forward_[l].bias);
    const Var bw = t.param(encoder_backward_[l].weight), bb = t.param(encoder_backward_[l].bias);
    LstmState s = encoder_forward_[l].zero_state(t, rows);
    for (std::size_t step = 0; step < length; ++step) {
      const LstmState next = autodiff::lstm_cell(t, inputs[step], s, fw, fb);
      const auto keep = batch.mask_at(step);
      s = {autodiff::select_rows(t, keep, next.h, s.h),
           autodiff::select_rows(t, keep, next.c, s.c)};
      fwd[step] = s.h;
    }
    LstmState r = encoder_backward_[l].zero_state(t, rows);
    for (std::size_t step = length; step-- > 0;) {
      const LstmState next = autodiff::lstm_cell(t, inputs[step], r, bw, bb);
      const auto keep = batch.mask_at(step);
      r = {autodiff::select_rows(t, keep, next.h, r.h),
           autodiff::select_rows(t, keep, next.c, r.c)};
      bwd[step] = r.h;
    }
    for (std::size_t step = 0; step < length; ++step) {
      const Var parts[] = {fwd[step], bwd[step]};
      inputs[step] = autodiff::concat_cols(t, parts);
    }
    last_forward_h.push_back(fwd[length - 1]);
    first_backward_h.push_back(bwd[0]);
  }
  const std::vector<Var>& encoder_states = inputs;  // B x 2H per position
  const Var summary_parts[] = {last_forward_h.back(), first_backward_h.back()};
  const Var summary = autodiff::concat_cols(t, summary_parts);

  std::vector<std::uint8_t> attention_mask(rows * length, 0);
  for (std::size_t step = 0; step < length; ++step) {
    for (std::size_t r = 0; r < rows; ++r)
      attention_mask[r * length + step] = batch.mask[step * rows + r];
  }
  const Var attention_w = t.param(attention_weight_);
  std::vector<Var> projected;
  projected.reserve(length);
  for (const Var e : encoder_states) projected.push_back(autodiff::matmul(t, e, attention_w));

  std::vector<LstmState> state;
  std::vector<Var> weights, biases;
  for (std::size_t l = 0; l < decoder_.size(); ++l) {
    const Var h0 = autodiff::tanh(
        t, autodiff::dense(t, summary, t.param(bridge_weight_[l]), t.param(bridge_bias_[l])));
    state.push_back({h0, t.constant(Tensor(rows, decoder_[l].hidden_size))});
    weights.push_back(t.param(decoder_[l].weight));
    biases.push_back(t.param(decoder_[l].bias));
  }
  const int bos = shape().target_classes + 1;
  std::vector<Var> head_inputs;
  head_inputs.reserve(length);
  for (std::size_t step = 0; step < length; ++step) {
    const bool first = step == 0;
    const auto ids = previous_ids(batch.target_at(first ? 0 : step - 1), rows, bos, first);
    Var input = autodiff::embedding(t, table, ids);
    for (std::size_t l = 0; l < decoder_.size(); ++l) {
      state[l] = autodiff::lstm_cell(t, input, state[l], weights[l], biases[l]);
      input = state[l].h;
    }
    const Attention att = attention_context(t, input, encoder_states, projected, attention_mask);
    const Var parts[] = {input, att.context};
    head_inputs.push_back(autodiff::concat_cols(t, parts));
  }
  const Var hidden = autodiff::concat_rows(t, head_inputs);
  const Var logits = autodiff::dense(t, hidden, t.param(head_weight_), t.param(head_bias_));
  return {autodiff::softmax_cross_entropy(t, logits, batch.target, batch.mask)};
}

std::unique_ptr<SequenceModel> make_model(const ModelConfig& config, const InputShape& shape) {
  if (const auto* c = std::get_if<NextTokenConfig>(&config)) {
    return std::make_unique<NextTokenModel>(*c, shape);
  }
  return std::make_unique<AutoencoderModel>(std::get<AutoencoderConfig>(config), shape);
}

TrainResult train(SequenceModel& model, const seqdata::Dataset& train_set,
                  const EpochCallback& on_epoch) {
  const TrainingConfig& cfg = training_config(model.config());
  cfg.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");
  const auto params = model.parameters();
  autodiff::AdamState adam(autodiff::AdamConfig{cfg.base_lr, 0.9, 0.999, 1e-8, cfg.lr_decay},
                           params);

  TrainResult result;
  const std::size_t n = train_set.size();
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = autodiff::decay_lr(adam, epoch);
    Rng rng(mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order.begin(), order.end());
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return seqdata::padded_length_for(train_set.sequences[a].length()) <
             seqdata::padded_length_for(train_set.sequences[b].length());
    });
    std::vector<std::pair<std::size_t, std::size_t>> batches;
    for (std::size_t start = 0; start < n;) {
      const int length = seqdata::padded_length_for(train_set.sequences[order[start]].length());
      std::size_t stop = start;
      while (stop < n && stop - start < batch_size &&
             seqdata::padded_length_for(train_set.sequences[order[stop]].length()) == length) {
        ++stop;
      }
      batches.emplace_back(start, stop);
      start = stop;
    }
    rng.shuffle(batches.begin(), batches.end());

    double loss_sum = 0.0;
    std::size_t token_count = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<const seqdata::PatientSequence*> members;
      for (std::size_t k = batches[b].first; k < batches[b].second; ++k) {
        members.push_back(&train_set.sequences[order[k]]);
      }
      const Batch batch = Batch::assemble(members, model.target_channel(), model.shape());
      for (Parameter* p : params) p->zero_grad();
      Trace trace;
      const BatchOutput out = model.forward(trace, batch);
      const double batch_loss = trace.value(out.ce.loss)[0];
      if (!std::isfinite(batch_loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b));
      }
      const Var mean = autodiff::scale(trace, out.ce.loss, 1.0 / static_cast<double>(out.ce.count));
      trace.backward(mean);
      if (cfg.clip_norm) autodiff::clip_grad_norm(params, *cfg.clip_norm);
      autodiff::adam_step(params, adam, lr);
      loss_sum += batch_loss;
      token_count += out.ce.count;
    }
    const EpochReport report{epoch, lr, loss_sum / static_cast<double>(token_count)};
    result.loss_history.push_back(report.mean_loss);
    result.epochs.push_back(report);
    if (on_epoch) on_epoch(report);
  }
  return result;
}

namespace {

constexpr const char* kCheckpointFormat = "claimseq-checkpoint";
constexpr int kCheckpointVersion = 1;

}  // namespace

nlohmann::json checkpoint_to_json(const SequenceModel& model,
                                  const seqdata::Dictionaries& dictionaries,
                                  const nlohmann::json& metadata) {
  const auto params = model.parameters();
  nlohmann::json shapes = nlohmann::json::array();
  for (const Parameter* p : params) shapes.push_back({p->value.rows(), p->value.cols()});
  const auto& s = model.shape();
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"model_kind", std::string(model_kind_name(model.kind()))},
          {"seed", training_config(model.config()).seed},
          {"config", config_to_json(model.config())},
          {"shape",
           {{"target_classes", s.target_classes},
            {"cost_type_classes", s.cost_type_classes},
            {"benefit_type_classes", s.benefit_type_classes},
            {"insurance_categories", s.insurance_categories}}},
          {"parameter_shapes", shapes},
          {"dictionaries", seqdata::dictionaries_to_json(dictionaries)},
          {"metadata", metadata},
          {"parameters", autodiff::parameters_to_json(params)}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != kCheckpointFormat) throw SchemaError("not a claimseq checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw SchemaError("unsupported checkpoint version " + j.at("version").dump());
    }
    const ModelKind kind = parse_model_kind(j.at("model_kind").get<std::string>());
    const ModelConfig base = default_config(kind, Profile::kDesk, Channel::kTreatment);
    const ModelConfig config = config_from_json(j.at("config"), base);
    const auto& js = j.at("shape");
    InputShape shape;
    shape.target_classes = js.at("target_classes").get<int>();
    shape.cost_type_classes = js.at("cost_type_classes").get<int>();
    shape.benefit_type_classes = js.at("benefit_type_classes").get<int>();
    shape.insurance_categories = js.at("insurance_categories").get<int>();
    Checkpoint out;
    out.model = make_model(config, shape);
    autodiff::parameters_from_json(j.at("parameters"), out.model->parameters());
    out.dictionaries = seqdata::dictionaries_from_json(j.at("dictionaries"));
    out.metadata = j.value("metadata", nlohmann::json::object());
    if (out.dictionaries.get(config_target(config)).size() != shape.target_classes) {
      throw VocabularyError("checkpoint dictionary size does not match its model shape");
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const SequenceModel& model,
                     const seqdata::Dictionaries& dictionaries, const nlohmann::json& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out << checkpoint_to_json(model, dictionaries, metadata).dump() << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("checkpoint '" + path + "' is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace claimseq::models
