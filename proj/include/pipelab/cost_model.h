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

#ifndef PIPELAB_COST_MODEL_H_
#define PIPELAB_COST_MODEL_H_

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>

namespace pipelab {

// Simulated time. One tick is one abstract unit in unit mode and the time of
// one FLOP on a stage in FLOPs mode (see DurationTable::seconds_per_tick).
using Ticks = int64_t;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Component { kPre, kAttn, kPost, kChunk };
enum class PassKind { kFwd, kBwdB, kBwdW };
enum class BoundaryKind { kHelixPreToAttn, kHelixAttnToPost, kLayerwise };

const char* ComponentName(Component c);
const char* BoundaryKindName(BoundaryKind k);
Component ParseComponent(const std::string& name);
BoundaryKind ParseBoundaryKind(const std::string& name);

struct ModelConfig {
  int64_t num_layers = 1;
  int64_t hidden_size = 1;
  int64_t num_heads = 1;
  int64_t micro_batch_size = 1;
  int64_t seq_length = 1;
  int64_t num_micro_batches = 1;
  int64_t pipeline_size = 1;
  int64_t sp_size = 1;

  // Throws ConfigError on zero or negative sizes or h % heads != 0.
  void Validate() const;
  int64_t bsh() const { return micro_batch_size * seq_length * hidden_size; }
  bool operator==(const ModelConfig&) const = default;
};

// compute_rate is per GPU; a stage runs sp_size GPUs, so its rate is
// compute_rate * sp_size.
struct DeviceSpec {
  double compute_rate = 1.0;    // FLOP/s
  double link_bandwidth = 1.0;  // bytes/s per direction
  double link_latency = 0.0;    // s
  int64_t bytes_per_element = 2;

  void Validate() const;
  static DeviceSpec H20Like();
  static DeviceSpec A800Like();
};

struct ComponentCost {
  int64_t fwd_flops = 0;
  int64_t bwd_b_flops = 0;
  int64_t bwd_w_flops = 0;
  int64_t act_full = 0;
  int64_t act_recompute = 0;

  int64_t Flops(PassKind pass) const;
};

struct ComponentCosts {
  ComponentCost pre;
  ComponentCost attn;
  ComponentCost post;
  bool qkv_in_attention = false;

  const ComponentCost& Get(Component c) const;
  int64_t TotalFwd() const { return pre.fwd_flops + attn.fwd_flops + post.fwd_flops; }
  int64_t TotalBwdB() const {
    return pre.bwd_b_flops + attn.bwd_b_flops + post.bwd_b_flops;
  }
  int64_t TotalBwdW() const {
    return pre.bwd_w_flops + attn.bwd_w_flops + post.bwd_w_flops;
  }
  int64_t TotalActFull() const { return pre.act_full + attn.act_full + post.act_full; }
  int64_t TotalActRecompute() const {
    return pre.act_recompute + attn.act_recompute + post.act_recompute;
  }
};

// Per-layer matrix FLOPs and activation elements by component. Biases,
// layernorm, GeLU and softmax count as zero. With exact_attention_stash the
// recompute-mode attention stash is bsh + 3h^2 + bsh instead of 2bsh.
ComponentCosts ComponentFlops(const ModelConfig& cfg, bool qkv_in_attention,
                              bool exact_attention_stash = false);

// 16bsh per layer, or 4bsh with recomputation.
int64_t ActivationElements(const ModelConfig& cfg, bool recompute);

struct CommVolumes {
  int64_t helix_pre_to_attn = 0;
  int64_t helix_attn_to_post = 0;
  int64_t layerwise_boundary = 0;

  int64_t Get(BoundaryKind kind) const;
};

int64_t CommVolume(BoundaryKind kind, const ModelConfig& cfg, bool qkv_optimized);
CommVolumes ComputeCommVolumes(const ModelConfig& cfg, bool qkv_optimized);

// Maps (component, pass) per layer and boundary kinds to ticks.
class DurationTable {
 public:
  DurationTable() = default;

  // FLOPs mode. Compute ticks equal FLOPs, so every Table-1 identity holds
  // exactly in integer time; comm ticks are rounded to the nearest tick.
  static DurationTable FromFlops(const ComponentCosts& costs, const CommVolumes& vols,
                                 const DeviceSpec& dev, int64_t sp_size);

  // Unit mode: forward times per component; B equals forward except for
  // attention (2x), W equals forward except for attention (0).
  static DurationTable FromUnits(Ticks t_pre, Ticks t_attn, Ticks t_post,
                                 Ticks comm = 0);

  void SetCompute(Component c, PassKind pass, Ticks t);
  void SetComm(BoundaryKind kind, Ticks t);

  // Per-layer time. kChunk sums the three components. Throws std::out_of_range
  // for keys that were never set.
  Ticks Compute(Component c, PassKind pass) const;
  Ticks Comm(BoundaryKind kind) const;
  bool HasComm(BoundaryKind kind) const { return comm_.count(kind) != 0; }

  double seconds_per_tick() const { return seconds_per_tick_; }
  void set_seconds_per_tick(double s) { seconds_per_tick_ = s; }

 private:
  std::map<std::pair<Component, PassKind>, Ticks> compute_;
  std::map<BoundaryKind, Ticks> comm_;
  double seconds_per_tick_ = 1e-6;
};

}  // namespace pipelab

#endif  // PIPELAB_COST_MODEL_H_
