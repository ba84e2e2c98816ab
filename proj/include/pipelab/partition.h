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

#ifndef PIPELAB_PARTITION_H_
#define PIPELAB_PARTITION_H_

#include <cstdint>
#include <vector>

#include "pipelab/cost_model.h"

namespace pipelab {

struct LayerwiseAssignment {
  int64_t num_layers = 0;
  int64_t num_stages = 0;
  std::vector<int64_t> stage_of_layer;
};

// Attention parallel partition. Pre(l) shares a stage with post(l-1); the
// attention of (l, i) lands on (l + i + 1) mod p.
struct HelixAssignment {
  int64_t num_layers = 0;
  int64_t num_stages = 0;
  int64_t num_micro_batches = 0;

  int64_t PreStage(int64_t layer) const;
  int64_t PostStage(int64_t layer) const;
  int64_t AttnStage(int64_t layer, int64_t micro_batch) const;
};

LayerwiseAssignment LayerwisePartition(int64_t num_layers, int64_t num_stages);
HelixAssignment HelixPartition(int64_t num_layers, int64_t num_stages,
                               int64_t num_micro_batches);

struct CommEdge {
  int64_t layer = 0;  // layer whose output crosses the edge
  int64_t micro_batch = 0;
  int64_t from_stage = 0;
  int64_t to_stage = 0;
  BoundaryKind kind = BoundaryKind::kLayerwise;

  bool self_edge() const { return from_stage == to_stage; }
};

// Forward edges only; gradient traffic mirrors them with equal volume.
// Layer-wise edges are emitted only at stage boundaries.
std::vector<CommEdge> CommEdges(const LayerwiseAssignment& a, const ModelConfig& cfg);
std::vector<CommEdge> CommEdges(const HelixAssignment& a, const ModelConfig& cfg);

}  // namespace pipelab

#endif  // PIPELAB_PARTITION_H_
