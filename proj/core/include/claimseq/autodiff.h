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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace claimseq {
class Rng;
}

namespace claimseq::autodiff {

// Dense row-major matrix of doubles. Vectors are 1 x n; batched
// activations are batch x features.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tensor row_vector(std::vector<double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

  void fill(double v);
  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_string() const;
  bool all_finite() const;
  // Throws NumericError naming `what` if any entry is NaN or infinite.
  void check_finite(std::string_view what) const;

  bool operator==(const Tensor&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

// A trainable tensor. The gradient buffer accumulates across backward
// passes until zero_grad(); it is an accumulator rather than part of the
// parameter's value, hence mutable.
struct Parameter {
  std::string name;
  Tensor value;
  mutable Tensor grad;

  Parameter() = default;
  Parameter(std::string name, Tensor value);
  void zero_grad() const { grad = Tensor(value.rows(), value.cols()); }
};

void init_uniform(Parameter& p, double limit, Rng& rng);

// Handle to a node on a Trace.
struct Var {
  std::size_t index = static_cast<std::size_t>(-1);
};

// Tape of operations recorded in forward order. Reverse iteration over the
// tape is a valid reverse topological order, so backward() visits each node
// exactly once.
enum class GradMode { kRecord, kInference };

class Trace {
 public:
  explicit Trace(GradMode mode = GradMode::kRecord) : mode_(mode) { nodes_.reserve(1024); }
  Trace(const Trace&) = delete;
  Trace& operator=(const Trace&) = delete;

  // Constant input; never receives a gradient.
  Var constant(Tensor value);
  // Leaf bound to a parameter; backward accumulates into p.grad. In
  // inference mode the leaf is a plain constant view.
  Var param(const Parameter& p);
  GradMode mode() const { return mode_; }

  const Tensor& value(Var v) const;
  // Gradient buffer of a node, allocated on first use.
  Tensor& grad(Var v);
  bool requires_grad(Var v) const { return nodes_[v.index].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  using BackwardFn = std::function<void(Trace&)>;
  // Appends an op output. `backward` is only kept when some input requires
  // a gradient.
  Var record(Tensor value, bool requires_grad, BackwardFn backward);

  // Seeds d(root)/d(root) = 1 for a 1 x 1 root and propagates.
  void backward(Var root);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    const Parameter* param = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };
  GradMode mode_;
  std::vector<Node> nodes_;
};

// --- Differentiable operations ------------------------------------------

// x[B x n] * w[n x m]
Var matmul(Trace& t, Var x, Var w);
// y[B x m] + b[1 x m] broadcast over rows.
Var add_bias(Trace& t, Var y, Var b);
// x[B x n] * w[n x m] + b[1 x m]
Var dense(Trace& t, Var x, Var w, Var b);
Var add(Trace& t, Var a, Var b);
Var mul(Trace& t, Var a, Var b);
Var scale(Trace& t, Var a, double factor);
Var sigmoid(Trace& t, Var a);
Var tanh(Trace& t, Var a);
// Sum of all entries -> 1 x 1.
Var sum_all(Trace& t, Var a);
// Elementwise sum of same-shape nodes.
Var sum(Trace& t, std::span<const Var> terms);
Var concat_cols(Trace& t, std::span<const Var> parts);
// Stacks same-width nodes vertically.
Var concat_rows(Trace& t, std::span<const Var> parts);
Var slice_cols(Trace& t, Var a, std::size_t start, std::size_t count);
// Row r is a[r] where keep[r] != 0, else b[r].
Var select_rows(Trace& t, std::span<const std::uint8_t> keep, Var a, Var b);
// Row-wise dot product of a[B x n] and b[B x n] -> B x 1.
Var rowdot(Trace& t, Var a, Var b);
// Softmax across the columns of each row, restricted to entries with
// mask[r * cols + c] != 0; excluded entries are exactly 0. Each row needs at
// least one unmasked entry.
Var masked_softmax(Trace& t, Var scores, std::span<const std::uint8_t> mask);
// out[r] = sum_c weights[r, c] * states[c][r]; weights B x T, T states B x D.
Var weighted_sum(Trace& t, Var weights, std::span<const Var> states);

// Rows of `table` selected by ids. Row 0 is the padding row: it is returned
// as stored (kept at zero) and never receives gradient.
Var embedding(Trace& t, Var table, std::span<const int> ids);

struct CrossEntropy {
  Var loss;               // 1 x 1: sum of -log p[target] over unmasked rows
  Tensor probs;           // B x d softmax; masked rows are all zero
  std::size_t count = 0;  // number of unmasked rows
};

// Row-wise softmax cross-entropy. targets are 1-based class ids (column
// targets[r] - 1). Masked rows contribute zero loss and zero gradient.
CrossEntropy softmax_cross_entropy(Trace& t, Var logits, std::span<const int> targets,
                                   std::span<const std::uint8_t> mask);

// --- LSTM cell ----------------------------------------------------------

struct LstmState {
  Var h;
  Var c;
};

// Gates packed as [input | forget | candidate | output], each hidden wide.
struct LstmCellParams {
  Parameter weight;  // (input + hidden) x 4*hidden
  Parameter bias;    // 1 x 4*hidden
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;

  LstmCellParams() = default;
  LstmCellParams(std::string name, std::size_t input_size, std::size_t hidden_size);
  // Weights uniform in [-1/sqrt(H), 1/sqrt(H)], biases 0, forget bias 1.
  void initialize(Rng& rng);
  std::vector<Parameter*> parameters() { return {&weight, &bias}; }
  // Zero vectors of shape rows x hidden for an initial state.
  LstmState zero_state(Trace& t, std::size_t rows) const;
};

LstmState lstm_cell(Trace& t, Var x, LstmState prev, Var weight, Var bias);
LstmState lstm_cell(Trace& t, Var x, LstmState prev, const LstmCellParams& params);

// --- Optimization -------------------------------------------------------

struct AdamConfig {
  double base_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double decay = 0.95;  // per-epoch learning-rate multiplier
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step_count = 0;

  AdamState() = default;
  AdamState(AdamConfig config, std::span<Parameter* const> params);
};

// base_lr * decay^epoch
double decay_lr(const AdamState& state, int epoch);

// One bias-corrected Adam update with learning rate `lr` using the current
// parameter gradients. Throws NumericError naming the offending parameter
// if a gradient is not finite.
void adam_step(std::span<Parameter* const> params, AdamState& state, double lr);

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

// --- Serialization ------------------------------------------------------

// [{"name", "shape": [rows, cols], "values": [...]}, ...] in the given order.
nlohmann::json parameters_to_json(std::span<const Parameter* const> params);
// Restores values in order; names and shapes must match.
void parameters_from_json(const nlohmann::json& j, std::span<Parameter* const> params);

// --- Gradient checking --------------------------------------------------

using ScalarFn = std::function<Var(Trace&)>;

// Max over parameter entries of |a - n| / max(|a|, |n|, 1e-8), where a is
// the backprop gradient and n the central difference with step eps.
double grad_check(const ScalarFn& f, std::span<Parameter* const> params, double eps);

}  // namespace claimseq::autodiff
