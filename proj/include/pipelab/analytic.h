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

#ifndef PIPELAB_ANALYTIC_H_
#define PIPELAB_ANALYTIC_H_

#include <cstdint>
#include <string>
#include <vector>

#include "pipelab/cost_model.h"
#include "pipelab/schedule.h"
#include "pipelab/sim_engine.h"

namespace pipelab {

// Closed-form per-stage bubble under uniform per-layer times.
Ticks BubbleFormula(Method method, int64_t p, int64_t L, Ticks t_pre, Ticks t_attn,
                    Ticks t_post);

// Closed-form peak activation elements on stage `stage`. For ZB1P this is
// the worst-case bound, attained at stage 0.
int64_t MemoryFormula(Method method, int64_t stage, int64_t p, int64_t L, int64_t b,
                      int64_t s, int64_t h, int64_t m);

struct AnalyticPrediction {
  Method method = Method::k1F1B;
  std::vector<Ticks> per_stage_bubble;
  std::vector<int64_t> per_stage_peak_activation;
};

// Forward component times come from `durations`.
AnalyticPrediction Predict(Method method, const ModelConfig& cfg,
                           const DurationTable& durations);

struct CompareReport {
  bool pass = true;
  std::vector<double> bubble_rel_error;
  std::vector<double> memory_rel_error;
  std::string detail;
};

// ZB1P memory passes when every stage is within the bound and the largest
// stage attains it; all other rows compare stage by stage.
// Bubbles are skipped when check_bubble is false (timed transfers).
CompareReport Compare(const AnalyticPrediction& prediction, const Metrics& metrics,
                      double tolerance, bool check_bubble = true);

struct StageMemoryRow {
  int64_t seq_length = 0;
  int64_t stage = 0;
  int64_t elements = 0;  // per stage
  double gib_per_gpu = 0.0;
  bool exceeds = false;
};

// 1F1B per-stage activation footprint per GPU across sequence lengths.
std::vector<StageMemoryRow> OneFOneBMemoryTable(const ModelConfig& base,
                                                const std::vector<int64_t>& seq_lengths,
                                                int64_t bytes_per_element, double capacity_gib);

// Attention time over forward layer time in FLOPs mode, QKV linear counted
// with pre-attention.
double AttentionForwardShare(const ModelConfig& cfg, const DeviceSpec& device);

}  // namespace pipelab

#endif  // PIPELAB_ANALYTIC_H_
