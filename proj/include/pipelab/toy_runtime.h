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

#ifndef PIPELAB_TOY_RUNTIME_H_
#define PIPELAB_TOY_RUNTIME_H_

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "pipelab/model.h"
#include "pipelab/schedule.h"

namespace pipelab {

class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RuntimeMode {
  // One thread walks the tasks in simulated start order.
  kReplay,
  // One thread per stage following its stage order; transfers go through a
  // shared mailbox.
  kThreaded,
};

struct RuntimeOptions {
  RuntimeMode mode = RuntimeMode::kReplay;
};

struct MemoryAudit {
  // Live activation elements on each stage after each of its tasks.
  std::vector<std::vector<int64_t>> series;
  std::vector<int64_t> peak;
  // Largest element count held for one (micro batch, layer) once its
  // forward pass finished, over all stages.
  int64_t max_retained_per_layer = 0;
};

struct TransferRecord {
  TaskId send = kNoTask;
  BoundaryKind boundary = BoundaryKind::kLayerwise;
  bool gradient = false;
  int64_t elements = 0;
};

struct RuntimeResult {
  TrainStepResult step;
  MemoryAudit memory;
  std::vector<TransferRecord> transfers;
};

// Runs a validated schedule on real tensors. Throws RuntimeError on a stash
// miss, a payload whose element count differs from the SEND volume, a
// deadlock, or activations left over at the end.
RuntimeResult ExecuteSchedule(const Schedule& sched, const ToyModel& model,
                              const std::vector<Tensor>& inputs,
                              const RuntimeOptions& options = {});

}  // namespace pipelab

#endif  // PIPELAB_TOY_RUNTIME_H_
