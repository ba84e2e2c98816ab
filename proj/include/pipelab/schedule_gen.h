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

#ifndef PIPELAB_SCHEDULE_GEN_H_
#define PIPELAB_SCHEDULE_GEN_H_

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pipelab/cost_model.h"
#include "pipelab/partition.h"
#include "pipelab/schedule.h"

namespace pipelab {

class ScheduleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenOptions {
  bool allow_unsaturated = false;  // layer-wise: permit m < p
  bool qkv_optimized = true;       // helix: ship the QKV weight with its input
  // ZB1P: per-stage activation cap in elements; defaults to 16bshL.
  std::optional<int64_t> memory_cap;
};

Schedule Gen1F1B(const ModelConfig& cfg, const GenOptions& opts = {});

// W(i) on stage s is placed right after B(i + s); leftover W tasks drain at
// the end. A W is pulled forward earlier only if the next forward would
// break the memory cap.
Schedule GenZb1p(const ModelConfig& cfg, const GenOptions& opts = {});

Schedule GenHelixNaive(const ModelConfig& cfg, const HelixAssignment& partition,
                       const GenOptions& opts = {});
Schedule GenHelixTwoFold(const ModelConfig& cfg, const HelixAssignment& partition,
                         const GenOptions& opts = {});

// Inserts RECOMPUTE_FWD before the backward of every pre/post task and shrinks
// their stash to the recompute-mode counts. Attention is untouched.
Schedule ApplyRecomputation(const Schedule& sched);

// Builds any method by name, including the recompute variant.
Schedule GenerateSchedule(Method method, const ModelConfig& cfg, const GenOptions& opts = {});

struct ValidationReport {
  bool ok = true;
  std::string violation;
  std::vector<TaskId> offending;
};

ValidationReport ValidateSchedule(const Schedule& sched);

}  // namespace pipelab

#endif  // PIPELAB_SCHEDULE_GEN_H_
