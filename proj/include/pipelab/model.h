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

#ifndef PIPELAB_MODEL_H_
#define PIPELAB_MODEL_H_

#include <cstdint>
#include <vector>

#include "pipelab/cost_model.h"
#include "pipelab/layer.h"
#include "pipelab/tensor.h"

namespace pipelab {

struct ToyModel {
  LayerDims dims;
  std::vector<LayerParams> layers;
  int64_t mlp_chunk = 0;  // sequence positions per MLP chunk; 0 = unchunked

  int64_t mlp_chunk_rows() const { return mlp_chunk * dims.batch; }

  // Uniform weights of scale 1/sqrt(h); layernorm gains near 1.
  static ToyModel Random(const ModelConfig& cfg, uint64_t seed);
};

LayerDims DimsOf(const ModelConfig& cfg);

// One [s*b, h] input per micro batch.
std::vector<Tensor> RandomInputs(const ModelConfig& cfg, uint64_t seed);

// Loss = sum(out^2) / numel, per micro batch.
double Loss(const Tensor& out);
Tensor LossGrad(const Tensor& out);

struct TrainStepResult {
  std::vector<double> losses;          // per micro batch
  std::vector<Tensor> input_grads;     // per micro batch
  std::vector<LayerParams> grads;      // per layer, summed over micro batches
};

// Gradients are produced per (micro batch, layer) and reduced in ascending
// micro-batch order, which pipelined executions reproduce exactly.
std::vector<LayerParams> ReduceGrads(const std::vector<std::vector<LayerParams>>& per_mb);

// Plain forward/backward over every micro batch, one layer at a time.
TrainStepResult SequentialTrainStep(const ToyModel& model, const std::vector<Tensor>& inputs);

}  // namespace pipelab

#endif  // PIPELAB_MODEL_H_
