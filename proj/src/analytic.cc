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

#include "pipelab/analytic.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace pipelab {

Ticks BubbleFormula(Method method, int64_t p, int64_t L, Ticks t_pre, Ticks t_attn,
                    Ticks t_post) {
  if (p < 1 || L < 1) throw ConfigError("p and L must be positive");
  switch (method) {
    case Method::k1F1B:
    case Method::kZb1p:
      if (L % p != 0) throw ConfigError("layer-wise formulas need L divisible by p");
      if (method == Method::k1F1B) return 3 * (p - 1) * (t_pre + t_attn + t_post) * (L / p);
      return (p - 1) * (t_pre + 3 * t_attn + t_post) * (L / p);
    case Method::kHelixNaive: return 3 * (p - 1) * (t_pre + t_post);
    case Method::kHelixTwoFold: return 6 * (p - 1) * (t_pre + t_post);
    case Method::kHelixTwoFoldRecompute: return 8 * (p - 1) * (t_pre + t_post);
  }
  throw ConfigError("unknown method");
}

int64_t MemoryFormula(Method method, int64_t stage, int64_t p, int64_t L, int64_t b,
                      int64_t s, int64_t h, int64_t m) {
  if (stage < 0 || stage >= p) throw ConfigError("stage out of range");
  const int64_t bsh = b * s * h;
  switch (method) {
    case Method::k1F1B: return 16 * (p - stage) * bsh * L / p;
    case Method::kZb1p: return 16 * bsh * L;
    case Method::kHelixNaive:
    case Method::kHelixTwoFold: return 16 * bsh * m * L / p;
    case Method::kHelixTwoFoldRecompute: return 4 * bsh * m * L / p;
  }
  throw ConfigError("unknown method");
}

AnalyticPrediction Predict(Method method, const ModelConfig& cfg,
                           const DurationTable& durations) {
  AnalyticPrediction pr;
  pr.method = method;
  const int64_t p = cfg.pipeline_size;
  const Ticks bubble = BubbleFormula(method, p, cfg.num_layers,
                                     durations.Compute(Component::kPre, PassKind::kFwd),
                                     durations.Compute(Component::kAttn, PassKind::kFwd),
                                     durations.Compute(Component::kPost, PassKind::kFwd));
  pr.per_stage_bubble.assign(p, bubble);
  for (int64_t st = 0; st < p; ++st) {
    pr.per_stage_peak_activation.push_back(
        MemoryFormula(method, st, p, cfg.num_layers, cfg.micro_batch_size, cfg.seq_length,
                      cfg.hidden_size, cfg.num_micro_batches));
  }
  return pr;
}

namespace {

double RelError(double predicted, double observed) {
  if (predicted == 0.0) {
    return observed == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return std::abs(observed - predicted) / std::abs(predicted);
}

}  // namespace

CompareReport Compare(const AnalyticPrediction& prediction, const Metrics& metrics,
                      double tolerance, bool check_bubble) {
  const size_t p = prediction.per_stage_bubble.size();
  if (metrics.per_stage_bubble.size() != p || metrics.per_stage_peak_activation.size() != p) {
    throw ConfigError("prediction and metrics describe different stage counts");
  }
  CompareReport rep;
  std::ostringstream os;
  for (size_t st = 0; st < p && check_bubble; ++st) {
    const double e = RelError(static_cast<double>(prediction.per_stage_bubble[st]),
                              static_cast<double>(metrics.per_stage_bubble[st]));
    rep.bubble_rel_error.push_back(e);
    if (e > tolerance) {
      rep.pass = false;
      os << "stage " << st << " bubble " << metrics.per_stage_bubble[st] << " vs "
         << prediction.per_stage_bubble[st] << "; ";
    }
  }
  if (prediction.method == Method::kZb1p) {
    const int64_t bound = prediction.per_stage_peak_activation.front();
    const int64_t worst = *std::max_element(metrics.per_stage_peak_activation.begin(),
                                            metrics.per_stage_peak_activation.end());
    for (size_t st = 0; st < p; ++st) {
      const int64_t peak = metrics.per_stage_peak_activation[st];
      rep.memory_rel_error.push_back(peak <= bound ? 0.0 : RelError(bound, peak));
      if (peak > bound) {
        rep.pass = false;
        os << "stage " << st << " memory " << peak << " above bound " << bound << "; ";
      }
    }
    if (RelError(static_cast<double>(bound), static_cast<double>(worst)) > tolerance) {
      rep.pass = false;
      os << "worst stage memory " << worst << " does not attain bound " << bound << "; ";
    }
  } else {
    for (size_t st = 0; st < p; ++st) {
      const double e = RelError(static_cast<double>(prediction.per_stage_peak_activation[st]),
                                static_cast<double>(metrics.per_stage_peak_activation[st]));
      rep.memory_rel_error.push_back(e);
      if (e > tolerance) {
        rep.pass = false;
        os << "stage " << st << " memory " << metrics.per_stage_peak_activation[st] << " vs "
           << prediction.per_stage_peak_activation[st] << "; ";
      }
    }
  }
  rep.detail = os.str();
  return rep;
}

std::vector<StageMemoryRow> OneFOneBMemoryTable(const ModelConfig& base,
                                                const std::vector<int64_t>& seq_lengths,
                                                int64_t bytes_per_element, double capacity_gib) {
  std::vector<StageMemoryRow> rows;
  const int64_t p = base.pipeline_size;
  for (int64_t s : seq_lengths) {
    for (int64_t st = 0; st < p; ++st) {
      StageMemoryRow r;
      r.seq_length = s;
      r.stage = st;
      r.elements = MemoryFormula(Method::k1F1B, st, p, base.num_layers, base.micro_batch_size,
                                 s, base.hidden_size, base.num_micro_batches);
      r.gib_per_gpu = static_cast<double>(r.elements) * static_cast<double>(bytes_per_element) /
                      static_cast<double>(base.sp_size) / static_cast<double>(int64_t{1} << 30);
      r.exceeds = r.gib_per_gpu > capacity_gib;
      rows.push_back(r);
    }
  }
  return rows;
}

double AttentionForwardShare(const ModelConfig& cfg, const DeviceSpec& device) {
  const DurationTable t = DurationTable::FromFlops(
      ComponentFlops(cfg, false), ComputeCommVolumes(cfg, false), device, cfg.sp_size);
  const double attn = static_cast<double>(t.Compute(Component::kAttn, PassKind::kFwd));
  const double total = static_cast<double>(t.Compute(Component::kChunk, PassKind::kFwd));
  return attn / total;
}

}  // namespace pipelab
