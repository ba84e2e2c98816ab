/**
 * Copyright 2026 The pipelab Authors. All Rights Reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Serial reference kernels against their OpenMP variants.

#include <benchmark/benchmark.h>

#include <random>

#include "pipelab/kernels.h"

namespace {

using pipelab::Tensor;
using pipelab::kernels::Exec;

Tensor Random(std::vector<int64_t> dims, uint64_t seed) {
  Tensor t(std::move(dims));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : t.data) v = u(rng);
  return t;
}

Exec ExecOf(const benchmark::State& state) {
  return state.range(1) == 0 ? Exec::kSerial : Exec::kParallel;
}

void BM_MatMul(benchmark::State& state) {
  const int64_t n = state.range(0);
  const Tensor a = Random({n, n}, 1), b = Random({n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(pipelab::kernels::MatMul(a, b, ExecOf(state)));
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}

void BM_MatMulTNAcc(benchmark::State& state) {
  const int64_t n = state.range(0);
  const Tensor a = Random({n, n}, 3), b = Random({n, n}, 4);
  Tensor c({n, n});
  for (auto _ : state) {
    pipelab::kernels::MatMulTNAcc(a, b, &c, ExecOf(state));
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}

void BM_Attention(benchmark::State& state) {
  const int64_t s = state.range(0), batch = 2, heads = 4, h = 64;
  const Tensor qkv = Random({s * batch, 3 * h}, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        pipelab::kernels::CausalAttentionForward(qkv, batch, heads, ExecOf(state)));
  }
}

}  // namespace

BENCHMARK(BM_MatMul)->ArgsProduct({{64, 128, 256}, {0, 1}});
BENCHMARK(BM_MatMulTNAcc)->ArgsProduct({{64, 128, 256}, {0, 1}});
BENCHMARK(BM_Attention)->ArgsProduct({{64, 256}, {0, 1}});

BENCHMARK_MAIN();
