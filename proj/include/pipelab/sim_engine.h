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

#ifndef PIPELAB_SIM_ENGINE_H_
#define PIPELAB_SIM_ENGINE_H_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pipelab/cost_model.h"
#include "pipelab/schedule.h"

namespace pipelab {

class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, std::vector<TaskId> frontier = {})
      : std::runtime_error(what), frontier_(std::move(frontier)) {}
  const std::vector<TaskId>& frontier() const { return frontier_; }

 private:
  std::vector<TaskId> frontier_;
};

struct CommModel {
  bool enabled = true;
  // Compute started while one of the stage's channels is busy runs this much
  // longer.
  double compute_slowdown = 1.0;
  int64_t bytes_per_element = 2;
};

struct Timeline {
  std::vector<Ticks> start;
  std::vector<Ticks> end;
  double seconds_per_tick = 1e-6;
};

struct Metrics {
  Ticks makespan = 0;
  std::vector<Ticks> per_stage_busy;
  // Idle compute time within [0, makespan].
  std::vector<Ticks> per_stage_bubble;
  double bubble_fraction = 0.0;
  std::vector<int64_t> per_stage_peak_activation;
  std::vector<int64_t> per_stage_peak_bytes;
};

struct SimResult {
  Timeline timeline;
  Metrics metrics;
};

// Ticks a task occupies its resource for under `durations`.
Ticks TaskDuration(const Task& t, const DurationTable& durations, const CommModel& comm);

SimResult Simulate(const Schedule& sched, const DurationTable& durations,
                   const CommModel& comm = {});

struct TaskDelay {
  TaskId id = kNoTask;
  Ticks exec_free = 0;     // previous task on the executor finished
  Ticks ready_nocomm = 0;  // inputs ready if transfers were free
  Ticks ready = 0;         // inputs actually ready
  Ticks start = 0;
  Ticks recv_delay = 0;    // idle attributable to transfers
  Ticks dep_wait = 0;      // remaining idle, waiting on upstream compute
  Ticks queue_wait = 0;    // ready but the executor was busy
};

struct OverlapReport {
  std::vector<TaskDelay> tasks;  // compute tasks, by id
  std::vector<Ticks> per_stage_recv_delay;
  std::vector<Ticks> per_stage_dep_wait;
  Ticks total_recv_delay = 0;

  // RECV-attributed delay summed over tasks of layers [first, last).
  Ticks RecvDelayForLayers(const Schedule& sched, int64_t first, int64_t last) const;
};

OverlapReport ComputeOverlapReport(const Timeline& timeline, const Schedule& sched);

struct MemoryTrace {
  // (completion time, live elements after the event) per stage.
  std::vector<std::vector<std::pair<Ticks, int64_t>>> series;
  std::vector<int64_t> peak;
};

// Throws SimulationError if a trajectory goes negative.
MemoryTrace ComputeMemoryTrace(const Timeline& timeline, const Schedule& sched);

}  // namespace pipelab

#endif  // PIPELAB_SIM_ENGINE_H_
