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

#include "pipelab/model.h"

#include <cmath>
#include <random>

#include "pipelab/kernels.h"

namespace pipelab {

namespace {

void FillUniform(Tensor* t, std::mt19937_64& rng, double center, double scale) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (double& v : t->data) v = center + scale * u(rng);
}

}  // namespace

LayerDims DimsOf(const ModelConfig& cfg) {
  return {cfg.seq_length, cfg.micro_batch_size, cfg.hidden_size, cfg.num_heads};
}

ToyModel ToyModel::Random(const ModelConfig& cfg, uint64_t seed) {
  cfg.Validate();
  ToyModel model;
  model.dims = DimsOf(cfg);
  std::mt19937_64 rng(seed);
  const double h = static_cast<double>(cfg.hidden_size);
  for (int64_t l = 0; l < cfg.num_layers; ++l) {
    LayerParams p = LayerParams::Zeros(cfg.hidden_size);
    FillUniform(&p.ln1_gain, rng, 1.0, 0.2);
    FillUniform(&p.ln1_bias, rng, 0.0, 0.2);
    FillUniform(&p.qkv_weight, rng, 0.0, 2.0 / std::sqrt(h));
    FillUniform(&p.o_weight, rng, 0.0, 2.0 / std::sqrt(h));
    FillUniform(&p.ln2_gain, rng, 1.0, 0.2);
    FillUniform(&p.ln2_bias, rng, 0.0, 0.2);
    FillUniform(&p.mlp_w1, rng, 0.0, 2.0 / std::sqrt(h));
    FillUniform(&p.mlp_w2, rng, 0.0, 1.0 / std::sqrt(h));
    model.layers.push_back(std::move(p));
  }
  return model;
}

std::vector<Tensor> RandomInputs(const ModelConfig& cfg, uint64_t seed) {
  cfg.Validate();
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Tensor> out;
  for (int64_t i = 0; i < cfg.num_micro_batches; ++i) {
    Tensor x({cfg.seq_length * cfg.micro_batch_size, cfg.hidden_size});
    FillUniform(&x, rng, 0.0, 2.0);
    out.push_back(std::move(x));
  }
  return out;
}

double Loss(const Tensor& out) {
  double sum = 0.0;
  for (double v : out.data) sum += v * v;
  return sum / static_cast<double>(out.numel());
}

Tensor LossGrad(const Tensor& out) {
  Tensor g(out.shape);
  const double n = static_cast<double>(out.numel());
  for (int64_t i = 0; i < out.numel(); ++i) g.data[i] = 2.0 * out.data[i] / n;
  return g;
}

std::vector<LayerParams> ReduceGrads(const std::vector<std::vector<LayerParams>>& per_mb) {
  std::vector<LayerParams> total;
  if (per_mb.empty()) return total;
  const int64_t hidden = per_mb.front().front().ln1_gain.numel();
  total.assign(per_mb.front().size(), LayerParams::Zeros(hidden));
  for (const auto& mb : per_mb) {
    for (size_t l = 0; l < mb.size(); ++l) {
      auto dst = total[l].All();
      auto src = mb[l].All();
      for (size_t k = 0; k < dst.size(); ++k) kernels::AddInPlace(dst[k], *src[k]);
    }
  }
  return total;
}

TrainStepResult SequentialTrainStep(const ToyModel& model, const std::vector<Tensor>& inputs) {
  const int64_t L = static_cast<int64_t>(model.layers.size());
  TrainStepResult r;
  std::vector<std::vector<LayerParams>> per_mb;
  for (const Tensor& x0 : inputs) {
    std::vector<LayerStash> stash(L);
    Tensor x = x0;
    for (int64_t l = 0; l < L; ++l) {
      x = LayerForward(model.layers[l], x, model.dims, model.mlp_chunk_rows(), &stash[l]);
    }
    r.losses.push_back(Loss(x));
    Tensor g = LossGrad(x);
    std::vector<LayerParams> grads(L, LayerParams::Zeros(model.dims.hidden));
    for (int64_t l = L - 1; l >= 0; --l) {
      g = LayerBackward(model.layers[l], g, std::move(stash[l]), model.dims,
                        model.mlp_chunk_rows(), &grads[l]);
    }
    r.input_grads.push_back(std::move(g));
    per_mb.push_back(std::move(grads));
  }
  r.grads = ReduceGrads(per_mb);
  return r;
}

}  // namespace pipelab
