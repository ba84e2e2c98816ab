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

#include "pipelab/partition.h"

namespace pipelab {

LayerwiseAssignment LayerwisePartition(int64_t num_layers, int64_t num_stages) {
  if (num_layers <= 0 || num_stages <= 0) {
    throw ConfigError("layer and stage counts must be positive");
  }
  if (num_layers % num_stages != 0) {
    throw ConfigError("num_layers must be divisible by pipeline_size");
  }
  LayerwiseAssignment a;
  a.num_layers = num_layers;
  a.num_stages = num_stages;
  const int64_t per_stage = num_layers / num_stages;
  a.stage_of_layer.resize(num_layers);
  for (int64_t l = 0; l < num_layers; ++l) a.stage_of_layer[l] = l / per_stage;
  return a;
}

HelixAssignment HelixPartition(int64_t num_layers, int64_t num_stages,
                               int64_t num_micro_batches) {
  if (num_layers <= 0 || num_stages <= 0 || num_micro_batches <= 0) {
    throw ConfigError("layer, stage and micro batch counts must be positive");
  }
  HelixAssignment a;
  a.num_layers = num_layers;
  a.num_stages = num_stages;
  a.num_micro_batches = num_micro_batches;
  return a;
}

int64_t HelixAssignment::PreStage(int64_t layer) const { return layer % num_stages; }

int64_t HelixAssignment::PostStage(int64_t layer) const {
  if (layer == num_layers - 1) return 0;
  return (layer + 1) % num_stages;
}

int64_t HelixAssignment::AttnStage(int64_t layer, int64_t micro_batch) const {
  return (layer + micro_batch + 1) % num_stages;
}

std::vector<CommEdge> CommEdges(const LayerwiseAssignment& a, const ModelConfig& cfg) {
  std::vector<CommEdge> edges;
  for (int64_t i = 0; i < cfg.num_micro_batches; ++i) {
    for (int64_t l = 0; l + 1 < a.num_layers; ++l) {
      const int64_t from = a.stage_of_layer[l], to = a.stage_of_layer[l + 1];
      if (from != to) edges.push_back({l, i, from, to, BoundaryKind::kLayerwise});
    }
  }
  return edges;
}

std::vector<CommEdge> CommEdges(const HelixAssignment& a, const ModelConfig& cfg) {
  std::vector<CommEdge> edges;
  for (int64_t i = 0; i < cfg.num_micro_batches; ++i) {
    for (int64_t l = 0; l < a.num_layers; ++l) {
      const int64_t attn = a.AttnStage(l, i);
      edges.push_back({l, i, a.PreStage(l), attn, BoundaryKind::kHelixPreToAttn});
      edges.push_back({l, i, attn, a.PostStage(l), BoundaryKind::kHelixAttnToPost});
    }
  }
  return edges;
}

}  // namespace pipelab
