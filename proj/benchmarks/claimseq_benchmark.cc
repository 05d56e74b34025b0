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

#include <benchmark/benchmark.h>

#include <cstdint>
#include <numeric>
#include <vector>

#include "claimseq/autodiff.h"
#include "claimseq/baseline.h"
#include "claimseq/eval.h"
#include "claimseq/rng.h"
#include "claimseq/scoring.h"

namespace {

using namespace claimseq;

autodiff::Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng) {
  autodiff::Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const auto x = random_tensor(64, n, rng);
  const autodiff::Parameter w("w", random_tensor(n, n, rng));
  for (auto _ : state) {
    autodiff::Trace t(autodiff::GradMode::kInference);
    const auto y = autodiff::matmul(t, t.constant(x), t.param(w));
    benchmark::DoNotOptimize(t.value(y)[0]);
  }
  state.SetItemsProcessed(state.iterations() * 64 * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_LstmStepBackward(benchmark::State& state) {
  const auto hidden = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  autodiff::LstmCellParams cell("cell", 32, hidden);
  cell.initialize(rng);
  const auto x = random_tensor(32, 32, rng);
  for (auto _ : state) {
    autodiff::Trace t;
    const auto s = autodiff::lstm_cell(t, t.constant(x), cell.zero_state(t, 32), cell);
    t.backward(autodiff::sum_all(t, s.h));
    benchmark::DoNotOptimize(cell.weight.grad[0]);
  }
}
BENCHMARK(BM_LstmStepBackward)->Arg(32)->Arg(64);

void BM_EdfQuery(benchmark::State& state) {
  Rng rng(3);
  std::vector<std::vector<double>> samples(200);
  for (auto& s : samples) {
    s.resize(static_cast<std::size_t>(state.range(0)));
    for (double& v : s) v = rng.uniform();
  }
  const auto table = scoring::EdfTable::build(samples);
  std::vector<double> queries(1024);
  for (double& q : queries) q = rng.uniform();
  for (auto _ : state) {
    double acc = 0.0;
    for (std::size_t i = 0; i < queries.size(); ++i) {
      acc += table.query(1 + static_cast<int>(i % 200), queries[i]);
    }
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(queries.size()));
}
BENCHMARK(BM_EdfQuery)->Arg(100)->Arg(10000);

void BM_RocAuc(benchmark::State& state) {
  Rng rng(4);
  std::vector<eval::Prediction> preds(static_cast<std::size_t>(state.range(0)));
  for (auto& p : preds) {
    p.label = rng.uniform() < 0.05;
    p.score = rng.uniform() + (p.label ? 0.3 : 0.0);
  }
  preds[0].label = true;
  preds[1].label = false;
  for (auto _ : state) benchmark::DoNotOptimize(eval::roc_auc(preds));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(100000);

void BM_IsolationForestFit(benchmark::State& state) {
  Rng rng(5);
  std::vector<std::vector<double>> points(static_cast<std::size_t>(state.range(0)));
  for (auto& p : points) {
    p.resize(16);
    for (double& v : p) v = rng.normal();
  }
  std::vector<std::uint64_t> keys(points.size());
  std::iota(keys.begin(), keys.end(), 0);
  for (auto _ : state) {
    const auto forest = baseline::IsolationForest::fit(points, keys, {100, 256, 7});
    benchmark::DoNotOptimize(forest.score(points[0]));
  }
}
BENCHMARK(BM_IsolationForestFit)->Arg(2000)->Arg(20000);

}  // namespace

BENCHMARK_MAIN();
