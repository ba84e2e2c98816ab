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

#ifndef PIPELAB_EXPERIMENT_H_
#define PIPELAB_EXPERIMENT_H_

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "pipelab/analytic.h"
#include "pipelab/cost_model.h"
#include "pipelab/schedule.h"
#include "pipelab/sim_engine.h"

namespace pipelab {

enum class TimeMode { kUnit, kFlops };

// Empty axes keep the base model value.
struct SweepAxes {
  std::vector<int64_t> seq_length;
  std::vector<int64_t> pipeline;
  std::vector<int64_t> micro_batches;
  std::vector<int64_t> layers;
  // When positive, m = token_budget / (b * s) at every point.
  int64_t token_budget = 0;
};

struct ExperimentConfig {
  ModelConfig model;
  DeviceSpec device = DeviceSpec::H20Like();
  TimeMode mode = TimeMode::kUnit;
  std::vector<Method> methods;
  Ticks t_pre = 1, t_attn = 3, t_post = 2;
  Ticks t_comm = 0;  // unit mode transfer time
  bool overlap = false;  // time transfers in the simulator
  bool recompute = false;
  bool qkv_optimization = true;
  bool trace = true;
  double tolerance = 0.0;
  std::string output_dir = "pipelab_out";
  SweepAxes sweep;
  int64_t overlap_min_seq = 1;
  int64_t overlap_max_seq = int64_t{1} << 20;
};

// INI text, see docs/formats.md. Throws ConfigError on unknown sections or
// keys, bad values, or an empty method list.
ExperimentConfig ParseConfig(const std::string& text);
ExperimentConfig LoadConfig(const std::string& path);

// Base model alone, or the cartesian product of the sweep axes in
// (layers, pipeline, micro_batches, seq_length) nesting order.
std::vector<ModelConfig> SweepPoints(const ExperimentConfig& config, bool use_axes);

DurationTable Durations(const ExperimentConfig& config, const ModelConfig& model,
                        bool qkv_optimized);

struct PointResult {
  Method method = Method::k1F1B;
  ModelConfig model;
  bool feasible = true;
  std::string note;  // why the point is infeasible
  Metrics metrics;
  double seconds_per_tick = 1e-6;
  bool bubble_checked = false;
  CompareReport report;
  std::string trace_file;
};

struct RunSummary {
  std::vector<PointResult> rows;
  bool all_pass = true;
};

// Simulates every (point, method); writes Chrome traces into output_dir when
// tracing is on. Rows come back in sweep order.
RunSummary RunPoints(const ExperimentConfig& config, const std::vector<ModelConfig>& points);

// Columns listed in docs/formats.md.
void WriteMetricsCsv(const RunSummary& summary, std::ostream& os);
void WriteReport(const RunSummary& summary, std::ostream& os);

struct OverlapThreshold {
  bool found = false;
  int64_t seq_length = 0;
  Ticks attn_ticks = 0;
  Ticks comm_ticks = 0;
};

// Smallest s in [lo, hi] whose forward attention time reaches the helix
// pre->attention transfer time, by integer bisection.
OverlapThreshold FindOverlapThreshold(const ModelConfig& base, const DeviceSpec& device,
                                      bool qkv_optimized, int64_t lo, int64_t hi);

struct RuntimeCheckRow {
  Method method = Method::k1F1B;
  bool ok = false;
  std::string detail;
};

// Executes every method on seeded tensors and compares bitwise with the
// sequential oracle.
std::vector<RuntimeCheckRow> RuntimeCheck(const ExperimentConfig& config, uint64_t seed);

}  // namespace pipelab

#endif  // PIPELAB_EXPERIMENT_H_
