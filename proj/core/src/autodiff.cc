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

#include "claimseq/autodiff.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "claimseq/error.h"
#include "claimseq/rng.h"

namespace claimseq::autodiff {

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows_ * cols_) {
    throw ShapeError("tensor of shape " + shape_string() + " given " +
                     std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::row_vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(1, n, std::move(values));
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

std::string Tensor::shape_string() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::check_finite(std::string_view what) const {
  if (!all_finite()) throw NumericError("non-finite value in " + std::string(what));
}

Parameter::Parameter(std::string name_, Tensor value_)
    : name(std::move(name_)), value(std::move(value_)), grad(value.rows(), value.cols()) {}

void init_uniform(Parameter& p, double limit, Rng& rng) {
  for (double& v : p.value.values()) v = rng.uniform(-limit, limit);
}

Var Trace::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Trace::param(const Parameter& p) {
  Node node;
  node.param = &p;
  node.requires_grad = mode_ == GradMode::kRecord;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

const Tensor& Trace::value(Var v) const {
  const Node& node = nodes_[v.index];
  return node.param ? node.param->value : node.value;
}

Tensor& Trace::grad(Var v) {
  Node& node = nodes_[v.index];
  if (node.param) {
    if (!node.param->grad.same_shape(node.param->value)) {
      node.param->grad = Tensor(node.param->value.rows(), node.param->value.cols());
    }
    return node.param->grad;
  }
  if (!node.grad.same_shape(node.value)) node.grad = Tensor(node.value.rows(), node.value.cols());
  return node.grad;
}

Var Trace::record(Tensor value, bool requires_grad, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad && mode_ == GradMode::kRecord;
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

void Trace::backward(Var root) {
  const Tensor& root_value = value(root);
  if (root_value.size() != 1) {
    throw ShapeError("backward() needs a scalar root, got " + root_value.shape_string());
  }
  if (!requires_grad(root)) return;
  grad(root)[0] += 1.0;
  for (std::size_t i = root.index + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || !node.backward) continue;
    if (node.grad.size() == 0) continue;  // nothing flowed here
    node.backward(*this);
  }
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

std::string shapes(const Tensor& a, const Tensor& b) {
  return a.shape_string() + " and " + b.shape_string();
}

}  // namespace

Var matmul(Trace& t, Var x, Var w) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  require(xv.cols() == wv.rows(), "matmul shape mismatch: " + shapes(xv, wv));
  const std::size_t rows = xv.rows(), inner = xv.cols(), cols = wv.cols();
  Tensor out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double* o = out.row(r).data();
    const double* xr = xv.row(r).data();
    for (std::size_t k = 0; k < inner; ++k) {
      const double a = xr[k];
      if (a == 0.0) continue;
      const double* wk = wv.row(k).data();
      for (std::size_t c = 0; c < cols; ++c) o[c] += a * wk[c];
    }
  }
  const std::size_t self = t.size();
  const bool needs = t.requires_grad(x) || t.requires_grad(w);
  return t.record(std::move(out), needs, [=](Trace& tr) {
    const Tensor& g = tr.grad(Var{self});
    const Tensor& xv = tr.value(x);
    const Tensor& wv = tr.value(w);
    if (tr.requires_grad(x)) {
      Tensor& gx = tr.grad(x);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = g.row(r).data();
        double* gxr = gx.row(r).data();
        for (std::size_t k = 0; k < inner; ++k) {
          const double* wk = wv.row(k).data();
          double acc = 0.0;
          for (std::size_t c = 0; c < cols; ++c) acc += gr[c] * wk[c];
          gxr[k] += acc;
        }
      }
    }
    if (tr.requires_grad(w)) {
      Tensor& gw = tr.grad(w);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = g.row(r).data();
        const double* xr = xv.row(r).data();
        for (std::size_t k = 0; k < inner; ++k) {
          const double a = xr[k];
          if (a == 0.0) continue;
          double* gwk = gw.row(k).data();
          for (std::size_t c = 0; c < cols; ++c) gwk[c] += a * gr[c];
        }
      }
    }
  });
}

Var add_bias(Trace& t, Var y, Var b) {
  const Tensor& yv = t.value(y);
  const Tensor& bv = t.value(b);
  require(bv.rows() == 1 && bv.cols() == yv.cols(), "bias shape mismatch: " + shapes(yv, bv));
  Tensor out = yv;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv[c];
  }
  const std::size_t self = t.size();
  return t.record(std::move(out), t.requires_grad(y) || t.requires_grad(b), [=](Trace& tr) {
    const Tensor& g = tr.grad(Var{self});
    if (tr.requires_grad(y)) {
      Tensor& gy = tr.grad(y);
      for (std::size_t i = 0; i < g.size(); ++i) gy[i] += g[i];
    }
    if (tr.requires_grad(b)) {
      Tensor& gb = tr.grad(b);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const auto row = g.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) gb[c] += row[c];
      }
    }
  });
}

Var dense(Trace& t, Var x, Var w, Var b) { return add_bias(t, matmul(t, x, w), b); }

Var add(Trace& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require(av.same_shape(bv), "add shape mismatch: " + shapes(av, bv));
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t self = t.size();
  return t.record(std::move(out), t.requires_grad(a) || t.requires_grad(b), [=](Trace& tr) {
    const Tensor& g = tr.grad(Var{self});
    for (const Var v : {a, b}) {
      if (!tr.requires_grad(v)) continue;
      Tensor& gv = tr.grad(v);
      for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }
  });
}

Var mul(Trace& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require(av.same_shape(bv), "mul shape mismatch: " + shapes(av, bv));
  Tensor out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t self = t.size();
  return t.record(std::move(out), t.requires_grad(a) || t.requires_grad(b), [=](Trace& tr) {
    const Tensor& g = tr.grad(Var{self});
    const Tensor& av = tr.value(a);
    const Tensor& bv = tr.value(b);
    if (tr.requires_grad(a)) {
      Tensor& ga = tr.grad(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tr.requires_grad(b)) {
      Tensor& gb = tr.grad(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Trace& t, Var a, double factor) {
  Tensor out = t.value(a);
  for (double& v : out.values()) v *= factor;
  const std::size_t self = t.size();
  return t.record(std::move(out), t.requires_grad(a), [=](Trace& tr) {
    const Tensor& g = tr.grad(Var{self});
    Tensor& ga = tr.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Var sigmoid(Trace& t, Var a) {
  Tensor out = t.value(a);
  for (double& v : out.values()) {
    v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  const std::size_t self = t.size();
  return t.record(std::move(out), t.requires_grad(a), [=](Trace& tr) {
    const Tensor& g = tr.grad(Var{self});
    const Tensor& y = tr.value(Var{self});
    Tensor& ga = tr.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var tanh(Trace& t, Var a) {
  Tensor out = t.value(a);
  for (double& v : out.values()) v = std::tanh(v);
  const std::size_t self = t.size();
  return t.record(std::move(out), t.requires_grad(a), [=](Trace& tr) {
    const Tensor& g = tr.grad(Var{self});
    const Tensor& y = tr.value(Var{self});
    Tensor& ga = tr.grad(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var sum_all(Trace& t, Var a) {
  double total = 0.0;
  for (const double v : t.value(a).values()) total += v;
  const std::size_t self = t.size();
  return t.record(Tensor(1, 1, total), t.requires_grad(a), [=](Trace& tr) {
    const double g = tr.grad(Var{self})[0];
    for (double& v : tr.grad(a).values()) v += g;
  });
}

Var sum(Trace& t, std::span<const Var> terms) {
  require(!terms.empty(), "sum of no terms");
  const std::vector<Var> parts(terms.begin(), terms.end());
  Tensor out = t.value(parts[0]);
  bool needs = t.requires_grad(parts[0]);
  for (std::size_t k = 1; k < parts.size(); ++k) {
    const Tensor& v = t.value(parts[k]);
    require(v.same_shape(out), "sum shape mismatch: " + shapes(out, v));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
    needs = needs || t.requires_grad(parts[k]);
  }
  const std::size_t self = t.size();
  return t.record(std::move(out), needs, [=](Trace& tr) {
    const Tensor& g = tr.grad(Var{self});
    for (const Var p : parts) {
      if (!tr.requires_grad(p)) continue;
      Tensor& gp = tr.grad(p);
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
    }
  });
}

Var concat_cols(Trace& t, std::span<const Var> parts_in) {
  require(!parts_in.empty(), "concat of no parts");
  const std::vector<Var> parts(parts_in.begin(), parts_in.end());
  const std::size_t rows = t.value(parts[0]).rows();
  std::vector<std::size_t> offsets;
  std::size_t cols = 0;
  bool needs = false;
  for (const Var p : parts) {
    const Tensor& v = t.value(p);
    require(v.rows() == rows, "concat row mismatch: " + shapes(t.value(parts[0]), v));
    offsets.push_back(cols);
    cols += v.cols();
    needs = needs || t.requires_grad(p);
  }
  Tensor out(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = t.value(parts[k]);
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(v.row(r).begin(), v.row(r).end(),
                out.row(r).begin() + static_cast<std::ptrdiff_t>(offsets[k]));
    }
  }
  const std::size_t self = t.size();
  return t.record(std::move(out), needs, [=](Trace& tr) {
    const Tensor& g = tr.grad(Var{self});
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (!tr.requires_grad(parts[k])) continue;
      Tensor& gp = tr.grad(parts[k]);
      const std::size_t width = gp.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* src = g.row(r).data() + offsets[k];
        double* dst = gp.row(r).data();
        for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
      }
    }
  });
}

Var concat_rows(Trace& t, std::span<const Var> parts_in) {
  require(!parts_in.empty(), "concat of no parts");
  const std::vector<Var> parts(parts_in.begin(), parts_in.end());
  const std::size_t cols = t.value(parts[0]).cols();
  std::vector<std::size_t> offsets;
  std::size_t rows = 0;
  bool needs = false;
  for (const Var p : parts) {
    const Tensor& v = t.value(p);
    require(v.cols() == cols, "concat column mismatch: " + shapes(t.value(parts[0]), v));
    offsets.push_back(rows);
    rows += v.rows();
    needs = needs || t.requires_grad(p);
  }
  Tensor out(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = t.value(parts[k]);
    std::copy(v.values().begin(), v.values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(offsets[k] * cols));
  }
  const std::size_t self = t.size();
  return t.record(std::move(out), needs, [=](Trace& tr) {
    const Tensor& g = tr.grad(Var{self});
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (!tr.requires_grad(parts[k])) continue;
      Tensor& gp = tr.grad(parts[k]);
      const double* src = g.values().data() + offsets[k] * cols;
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += src[i];
    }
  });
}

Var slice_cols(Trace& t, Var a, std::size_t start, std::size_t count) {
  const Tensor& av = t.value(a);
  require(start + count <= av.cols(), "slice out of range for " + av.shape_string());
  Tensor out(av.rows(), count);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    std::copy_n(av.row(r).data() + start, count, out.row(r).data());
  }
  const std::size_t self = t.size();
  return t.record(std::move(out), t.requires_grad(a), [=](Trace& tr) {
    const Tensor& g = tr.grad(Var{self});
    Tensor& ga = tr.grad(a);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      const double* src = g.row(r).data();
      double* dst = ga.row(r).data() + start;
      for (std::size_t c = 0; c < count; ++c) dst[c] += src[c];
    }
  });
}

Var select_rows(Trace& t, std::span<const std::uint8_t> keep_in, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require(av.same_shape(bv), "select shape mismatch: " + shapes(av, bv));
  require(keep_in.size() == av.rows(), "select mask length mismatch");
  const std::vector<std::uint8_t> keep(keep_in.begin(), keep_in.end());
  Tensor out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    const auto src = keep[r] ? av.row(r) : bv.row(r);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  const std::size_t self = t.size();
  return t.record(std::move(out), t.requires_grad(a) || t.requires_grad(b), [=](Trace& tr) {
    const Tensor& g = tr.grad(Var{self});
    for (std::size_t r = 0; r < g.rows(); ++r) {
      const Var target = keep[r] ? a : b;
      if (!tr.requires_grad(target)) continue;
      auto dst = tr.grad(target).row(r);
      const auto src = g.row(r);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  });
}

Var rowdot(Trace& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require(av.same_shape(bv), "rowdot shape mismatch: " + shapes(av, bv));
  Tensor out(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double acc = 0.0;
    const auto ar = av.row(r);
    const auto br = bv.row(r);
    for (std::size_t c = 0; c < ar.size(); ++c) acc += ar[c] * br[c];
    out[r] = acc;
  }
  const std::size_t self = t.size();
  return t.record(std::move(out), t.requires_grad(a) || t.requires_grad(b), [=](Trace& tr) {
    const Tensor& g = tr.grad(Var{self});
    const Tensor& av = tr.value(a);
    const Tensor& bv = tr.value(b);
    if (tr.requires_grad(a)) {
      Tensor& ga = tr.grad(a);
      for (std::size_t r = 0; r < av.rows(); ++r) {
        auto dst = ga.row(r);
        const auto src = bv.row(r);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += g[r] * src[c];
      }
    }
    if (tr.requires_grad(b)) {
      Tensor& gb = tr.grad(b);
      for (std::size_t r = 0; r < av.rows(); ++r) {
        auto dst = gb.row(r);
        const auto src = av.row(r);
        for (std::size_t c = 0; c < src.size(); ++c) dst[c] += g[r] * src[c];
      }
    }
  });
}

Var masked_softmax(Trace& t, Var scores, std::span<const std::uint8_t> mask_in) {
  const Tensor& sv = t.value(scores);
  require(mask_in.size() == sv.size(), "softmax mask size mismatch for " + sv.shape_string());
  const std::vector<std::uint8_t> mask(mask_in.begin(), mask_in.end());
  const std::size_t cols = sv.cols();
  Tensor out(sv.rows(), cols);
  for (std::size_t r = 0; r < sv.rows(); ++r) {
    const std::uint8_t* m = mask.data() + r * cols;
    double hi = -INFINITY;
    for (std::size_t c = 0; c < cols; ++c) {
      if (m[c]) hi = std::max(hi, sv(r, c));
    }
    require(std::isfinite(hi), "masked softmax row " + std::to_string(r) + " has no entries");
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!m[c]) continue;
      out(r, c) = std::exp(sv(r, c) - hi);
      z += out(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (m[c]) out(r, c) /= z;
    }
  }
  const std::size_t self = t.size();
  return t.record(std::move(out), t.requires_grad(scores), [=](Trace& tr) {
    const Tensor& g = tr.grad(Var{self});
    const Tensor& y = tr.value(Var{self});
    Tensor& gs = tr.grad(scores);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      const std::uint8_t* m = mask.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        if (m[c]) dot += g(r, c) * y(r, c);
      }
      for (std::size_t c = 0; c < cols; ++c) {
        if (m[c]) gs(r, c) += y(r, c) * (g(r, c) - dot);
      }
    }
  });
}

Var weighted_sum(Trace& t, Var weights, std::span<const Var> states_in) {
  const Tensor& wv = t.value(weights);
  require(wv.cols() == states_in.size(), "weighted_sum: " + std::to_string(states_in.size()) +
                                             " states for weights " + wv.shape_string());
  require(!states_in.empty(), "weighted_sum of no states");
  const std::vector<Var> states(states_in.begin(), states_in.end());
  const std::size_t rows = wv.rows();
  const std::size_t width = t.value(states[0]).cols();
  bool needs = t.requires_grad(weights);
  Tensor out(rows, width);
  for (std::size_t k = 0; k < states.size(); ++k) {
    const Tensor& s = t.value(states[k]);
    require(s.rows() == rows && s.cols() == width, "weighted_sum state shape mismatch");
    needs = needs || t.requires_grad(states[k]);
    for (std::size_t r = 0; r < rows; ++r) {
      const double w = wv(r, k);
      if (w == 0.0) continue;
      const double* src = s.row(r).data();
      double* dst = out.row(r).data();
      for (std::size_t c = 0; c < width; ++c) dst[c] += w * src[c];
    }
  }
  const std::size_t self = t.size();
  return t.record(std::move(out), needs, [=](Trace& tr) {
    const Tensor& g = tr.grad(Var{self});
    const Tensor& wv = tr.value(weights);
    const bool want_w = tr.requires_grad(weights);
    for (std::size_t k = 0; k < states.size(); ++k) {
      const Tensor& s = tr.value(states[k]);
      const bool want_s = tr.requires_grad(states[k]);
      for (std::size_t r = 0; r < rows; ++r) {
        const double* gr = g.row(r).data();
        if (want_w) {
          const double* sr = s.row(r).data();
          double acc = 0.0;
          for (std::size_t c = 0; c < width; ++c) acc += gr[c] * sr[c];
          tr.grad(weights)(r, k) += acc;
        }
        if (want_s) {
          const double w = wv(r, k);
          if (w == 0.0) continue;
          double* dst = tr.grad(states[k]).row(r).data();
          for (std::size_t c = 0; c < width; ++c) dst[c] += w * gr[c];
        }
      }
    }
  });
}

Var embedding(Trace& t, Var table, std::span<const int> ids_in) {
  const Tensor& tv = t.value(table);
  const std::vector<int> ids(ids_in.begin(), ids_in.end());
  Tensor out(ids.size(), tv.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const int id = ids[r];
    if (id < 0 || static_cast<std::size_t>(id) >= tv.rows()) {
      throw VocabularyError("embedding id " + std::to_string(id) + " outside table with " +
                            std::to_string(tv.rows()) + " rows");
    }
    std::copy(tv.row(static_cast<std::size_t>(id)).begin(),
              tv.row(static_cast<std::size_t>(id)).end(), out.row(r).begin());
  }
  const std::size_t self = t.size();
  return t.record(std::move(out), t.requires_grad(table), [=](Trace& tr) {
    const Tensor& g = tr.grad(Var{self});
    Tensor& gt = tr.grad(table);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      if (ids[r] == 0) continue;
      auto dst = gt.row(static_cast<std::size_t>(ids[r]));
      const auto src = g.row(r);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  });
}

CrossEntropy softmax_cross_entropy(Trace& t, Var logits, std::span<const int> targets_in,
                                   std::span<const std::uint8_t> mask_in) {
  const Tensor& lv = t.value(logits);
  require(targets_in.size() == lv.rows() && mask_in.size() == lv.rows(),
          "cross-entropy targets/mask length mismatch for " + lv.shape_string());
  const std::vector<int> targets(targets_in.begin(), targets_in.end());
  const std::vector<std::uint8_t> mask(mask_in.begin(), mask_in.end());
  const std::size_t d = lv.cols();
  CrossEntropy result;
  result.probs = Tensor(lv.rows(), d);
  double loss = 0.0;
  for (std::size_t r = 0; r < lv.rows(); ++r) {
    if (!mask[r]) continue;
    const int target = targets[r];
    if (target < 1 || static_cast<std::size_t>(target) > d) {
      throw VocabularyError("target id " + std::to_string(target) + " outside [1, " +
                            std::to_string(d) + "]");
    }
    const auto row = lv.row(r);
    const double hi = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    auto p = result.probs.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      p[c] = std::exp(row[c] - hi);
      z += p[c];
    }
    for (std::size_t c = 0; c < d; ++c) p[c] /= z;
    // log-sum-exp form keeps -log p finite for tiny probabilities.
    loss += std::log(z) - (row[static_cast<std::size_t>(target - 1)] - hi);
    ++result.count;
  }
  const std::size_t self = t.size();
  auto probs = std::make_shared<const Tensor>(result.probs);
  result.loss = t.record(Tensor(1, 1, loss), t.requires_grad(logits), [=](Trace& tr) {
    const double g = tr.grad(Var{self})[0];
    Tensor& gl = tr.grad(logits);
    for (std::size_t r = 0; r < targets.size(); ++r) {
      if (!mask[r]) continue;
      const auto p = probs->row(r);
      auto dst = gl.row(r);
      for (std::size_t c = 0; c < d; ++c) dst[c] += g * p[c];
      dst[static_cast<std::size_t>(targets[r] - 1)] -= g;
    }
  });
  return result;
}

LstmCellParams::LstmCellParams(std::string name, std::size_t input, std::size_t hidden)
    : weight(name + ".weight", Tensor(input + hidden, 4 * hidden)),
      bias(name + ".bias", Tensor(1, 4 * hidden)),
      input_size(input),
      hidden_size(hidden) {}

void LstmCellParams::initialize(Rng& rng) {
  init_uniform(weight, 1.0 / std::sqrt(static_cast<double>(hidden_size)), rng);
  bias.value.fill(0.0);
  for (std::size_t c = hidden_size; c < 2 * hidden_size; ++c) bias.value[c] = 1.0;
}

LstmState lstm_cell(Trace& t, Var x, LstmState prev, Var weight, Var bias) {
  const std::size_t hidden = t.value(prev.h).cols();
  require(t.value(weight).cols() == 4 * hidden, "lstm weight has " +
                                                    t.value(weight).shape_string() +
                                                    " for hidden size " + std::to_string(hidden));
  require(t.value(prev.c).same_shape(t.value(prev.h)), "lstm state shape mismatch");
  const Var in[] = {x, prev.h};
  const Var z = dense(t, concat_cols(t, in), weight, bias);
  const Var i = sigmoid(t, slice_cols(t, z, 0, hidden));
  const Var f = sigmoid(t, slice_cols(t, z, hidden, hidden));
  const Var g = tanh(t, slice_cols(t, z, 2 * hidden, hidden));
  const Var o = sigmoid(t, slice_cols(t, z, 3 * hidden, hidden));
  const Var c = add(t, mul(t, f, prev.c), mul(t, i, g));
  const Var h = mul(t, o, tanh(t, c));
  return {h, c};
}

LstmState LstmCellParams::zero_state(Trace& t, std::size_t rows) const {
  return {t.constant(Tensor(rows, hidden_size)), t.constant(Tensor(rows, hidden_size))};
}

LstmState lstm_cell(Trace& t, Var x, LstmState prev, const LstmCellParams& params) {
  require(t.value(x).cols() == params.input_size, "lstm input width " +
                                                      std::to_string(t.value(x).cols()) +
                                                      " != " + std::to_string(params.input_size));
  return lstm_cell(t, x, prev, t.param(params.weight), t.param(params.bias));
}

AdamState::AdamState(AdamConfig cfg, std::span<Parameter* const> params) : config(cfg) {
  for (const Parameter* p : params) {
    first_moment.emplace_back(p->value.rows(), p->value.cols());
    second_moment.emplace_back(p->value.rows(), p->value.cols());
  }
}

double decay_lr(const AdamState& state, int epoch) {
  return state.config.base_lr * std::pow(state.config.decay, epoch);
}

void adam_step(std::span<Parameter* const> params, AdamState& state, double lr) {
  if (params.size() != state.first_moment.size()) {
    throw ShapeError("Adam state tracks " + std::to_string(state.first_moment.size()) +
                     " parameters, given " + std::to_string(params.size()));
  }
  for (const Parameter* p : params) {
    if (!p->grad.all_finite())
      throw NumericError("non-finite gradient for parameter '" + p->name + "'");
  }
  ++state.step_count;
  const auto& cfg = state.config;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    Tensor& m = state.first_moment[k];
    Tensor& v = state.second_moment[k];
    if (!m.same_shape(p.value)) throw ShapeError("Adam moment shape mismatch for '" + p.name + "'");
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    for (const double g : p->grad.values()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (Parameter* p : params) {
      for (double& g : p->grad.values()) g *= factor;
    }
  }
  return norm;
}

nlohmann::json parameters_to_json(std::span<const Parameter* const> params) {
  nlohmann::json out = nlohmann::json::array();
  for (const Parameter* p : params) {
    out.push_back(
        {{"name", p->name},
         {"shape", {p->value.rows(), p->value.cols()}},
         {"values", std::vector<double>(p->value.values().begin(), p->value.values().end())}});
  }
  return out;
}

void parameters_from_json(const nlohmann::json& j, std::span<Parameter* const> params) {
  if (!j.is_array() || j.size() != params.size()) {
    throw SchemaError("checkpoint holds " + std::to_string(j.is_array() ? j.size() : 0) +
                      " parameter arrays, model expects " + std::to_string(params.size()));
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    const auto& entry = j[k];
    const auto name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (name != p.name || shape.size() != 2 || shape[0] != p.value.rows() ||
        shape[1] != p.value.cols()) {
      throw SchemaError("checkpoint parameter '" + name + "' does not match model parameter '" +
                        p.name + "' " + p.value.shape_string());
    }
    p.value = Tensor(shape[0], shape[1], entry.at("values").get<std::vector<double>>());
    p.value.check_finite(p.name);
    p.zero_grad();
  }
}

namespace {

double evaluate(const ScalarFn& f) {
  Trace trace;
  const double v = trace.value(f(trace))[0];
  if (!std::isfinite(v)) throw NumericError("grad_check: function value is not finite");
  return v;
}

}  // namespace

double grad_check(const ScalarFn& f, std::span<Parameter* const> params, double eps) {
  if (!(eps >= 1e-6 && eps <= 1e-3)) throw ConfigError("grad_check eps must lie in [1e-6, 1e-3]");
  for (Parameter* p : params) p->zero_grad();
  {
    Trace trace;
    const Var root = f(trace);
    if (!std::isfinite(trace.value(root)[0])) {
      throw NumericError("grad_check: function value is not finite");
    }
    trace.backward(root);
  }
  double worst = 0.0;
  for (Parameter* p : params) {
    const Tensor analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + eps;
      const double up = evaluate(f);
      p->value[i] = saved - eps;
      const double down = evaluate(f);
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace claimseq::autodiff
