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

#ifndef PIPELAB_SCHEDULE_H_
#define PIPELAB_SCHEDULE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "pipelab/cost_model.h"

namespace pipelab {

using TaskId = int32_t;
inline constexpr TaskId kNoTask = -1;

// kBwd is a fused B+W backward. 1F1B and helix schedules use it; ZB1P uses
// the split kinds.
enum class TaskKind { kFwd, kBwdB, kBwdW, kBwd, kRecomputeFwd, kSend, kRecv };

enum class Method { k1F1B, kZb1p, kHelixNaive, kHelixTwoFold, kHelixTwoFoldRecompute };

const char* TaskKindName(TaskKind k);
TaskKind ParseTaskKind(const std::string& name);
const char* MethodName(Method m);
Method ParseMethod(const std::string& name);
bool IsHelix(Method m);

struct Task {
  TaskId id = kNoTask;
  int64_t stage = 0;
  int64_t micro_batch = 0;
  int64_t layer = 0;
  int64_t num_layers = 1;  // > 1 only for layer-wise chunks
  TaskKind kind = TaskKind::kFwd;
  Component component = Component::kChunk;

  // SEND/RECV only. A gradient message flows along the reversed edge.
  BoundaryKind boundary = BoundaryKind::kLayerwise;
  int64_t volume = 0;
  bool gradient = false;
  TaskId peer = kNoTask;

  // Activation elements allocated (> 0) or freed (< 0) at completion.
  int64_t mem_delta = 0;

  std::vector<TaskId> deps;
  // Cross-stage ordering constraints that carry no payload.
  std::vector<TaskId> control_deps;

  bool is_comm() const { return kind == TaskKind::kSend || kind == TaskKind::kRecv; }
  std::string Label() const;
};

struct Schedule {
  Method method = Method::k1F1B;
  ModelConfig cfg;
  bool qkv_optimized = false;
  bool recomputed = false;
  std::vector<Task> tasks;
  std::vector<std::vector<TaskId>> stage_order;

  int64_t num_stages() const { return static_cast<int64_t>(stage_order.size()); }
  const Task& task(TaskId id) const { return tasks.at(id); }
  Task& task(TaskId id) { return tasks.at(id); }

  TaskId AddTask(Task t);

  // Wires producer -> consumer. Same-stage pairs get a direct dependency;
  // otherwise a matched SEND/RECV pair carrying `volume` elements.
  void Connect(TaskId producer, TaskId consumer, BoundaryKind kind, int64_t volume,
               bool gradient);

  // Method label including the recompute transform.
  Method EffectiveMethod() const;
};

}  // namespace pipelab

#endif  // PIPELAB_SCHEDULE_H_
