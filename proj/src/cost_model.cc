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

#include "pipelab/cost_model.h"

#include <cmath>

namespace pipelab {

const char* ComponentName(Component c) {
  switch (c) {
    case Component::kPre: return "pre";
    case Component::kAttn: return "attn";
    case Component::kPost: return "post";
    case Component::kChunk: return "chunk";
  }
  return "?";
}

const char* BoundaryKindName(BoundaryKind k) {
  switch (k) {
    case BoundaryKind::kHelixPreToAttn: return "helix_pre_to_attn";
    case BoundaryKind::kHelixAttnToPost: return "helix_attn_to_post";
    case BoundaryKind::kLayerwise: return "layerwise_boundary";
  }
  return "?";
}

Component ParseComponent(const std::string& name) {
  for (Component c : {Component::kPre, Component::kAttn, Component::kPost,
                      Component::kChunk}) {
    if (name == ComponentName(c)) return c;
  }
  throw ConfigError("unknown component: " + name);
}

BoundaryKind ParseBoundaryKind(const std::string& name) {
  for (BoundaryKind k : {BoundaryKind::kHelixPreToAttn, BoundaryKind::kHelixAttnToPost,
                         BoundaryKind::kLayerwise}) {
    if (name == BoundaryKindName(k)) return k;
  }
  throw ConfigError("unknown boundary kind: " + name);
}

void ModelConfig::Validate() const {
  auto positive = [](int64_t v, const char* what) {
    if (v <= 0) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(num_layers, "num_layers");
  positive(hidden_size, "hidden_size");
  positive(num_heads, "num_heads");
  positive(micro_batch_size, "micro_batch_size");
  positive(seq_length, "seq_length");
  positive(num_micro_batches, "num_micro_batches");
  positive(pipeline_size, "pipeline_size");
  positive(sp_size, "sp_size");
  if (hidden_size % num_heads != 0) {
    throw ConfigError("hidden_size must be divisible by num_heads");
  }
}

void DeviceSpec::Validate() const {
  if (!(compute_rate > 0) || !(link_bandwidth > 0) || link_latency < 0 ||
      bytes_per_element <= 0) {
    throw ConfigError("device rates must be positive");
  }
}

// Nominal dense bf16 peak per GPU; four NICs per node.
DeviceSpec DeviceSpec::H20Like() {
  DeviceSpec d;
  d.compute_rate = 148e12;
  d.link_bandwidth = 4 * 200e9 / 8;
  d.link_latency = 5e-6;
  d.bytes_per_element = 2;
  return d;
}

DeviceSpec DeviceSpec::A800Like() {
  DeviceSpec d;
  d.compute_rate = 312e12;
  d.link_bandwidth = 4 * 100e9 / 8;
  d.link_latency = 5e-6;
  d.bytes_per_element = 2;
  return d;
}

int64_t ComponentCost::Flops(PassKind pass) const {
  switch (pass) {
    case PassKind::kFwd: return fwd_flops;
    case PassKind::kBwdB: return bwd_b_flops;
    case PassKind::kBwdW: return bwd_w_flops;
  }
  return 0;
}

const ComponentCost& ComponentCosts::Get(Component c) const {
  switch (c) {
    case Component::kPre: return pre;
    case Component::kAttn: return attn;
    case Component::kPost: return post;
    case Component::kChunk: break;
  }
  throw ConfigError("ComponentCosts has no chunk entry");
}

ComponentCosts ComponentFlops(const ModelConfig& cfg, bool qkv_in_attention,
                              bool exact_attention_stash) {
  cfg.Validate();
  const int64_t b = cfg.micro_batch_size, s = cfg.seq_length, h = cfg.hidden_size;
  const int64_t bsh = b * s * h;
  const int64_t qkv = 6 * bsh * h;
  const int64_t core = 4 * b * h * s * s;
  const int64_t o = 2 * bsh * h;
  const int64_t mlp = 16 * bsh * h;

  ComponentCosts c;
  c.qkv_in_attention = qkv_in_attention;
  c.pre = {0, 0, 0, bsh, bsh};
  c.attn = {core, 2 * core, 0, 3 * bsh, 2 * bsh};
  c.post = {o + mlp, o + mlp, o + mlp, 11 * bsh, bsh};
  if (exact_attention_stash) c.attn.act_recompute = 2 * bsh + 3 * h * h;

  // The QKV linear and its input activation move together.
  ComponentCost& owner = qkv_in_attention ? c.attn : c.pre;
  owner.fwd_flops += qkv;
  owner.bwd_b_flops += qkv;
  owner.bwd_w_flops += qkv;
  owner.act_full += bsh;
  return c;
}

int64_t ActivationElements(const ModelConfig& cfg, bool recompute) {
  cfg.Validate();
  return (recompute ? 4 : 16) * cfg.bsh();
}

int64_t CommVolumes::Get(BoundaryKind kind) const {
  switch (kind) {
    case BoundaryKind::kHelixPreToAttn: return helix_pre_to_attn;
    case BoundaryKind::kHelixAttnToPost: return helix_attn_to_post;
    case BoundaryKind::kLayerwise: return layerwise_boundary;
  }
  throw ConfigError("unknown boundary kind");
}

int64_t CommVolume(BoundaryKind kind, const ModelConfig& cfg, bool qkv_optimized) {
  cfg.Validate();
  const int64_t bsh = cfg.bsh(), h = cfg.hidden_size;
  switch (kind) {
    case BoundaryKind::kHelixPreToAttn:
      return qkv_optimized ? 2 * bsh + 3 * h * h : 4 * bsh;
    case BoundaryKind::kHelixAttnToPost: return 2 * bsh;
    case BoundaryKind::kLayerwise: return bsh;
  }
  throw ConfigError("unknown boundary kind");
}

CommVolumes ComputeCommVolumes(const ModelConfig& cfg, bool qkv_optimized) {
  CommVolumes v;
  v.helix_pre_to_attn = CommVolume(BoundaryKind::kHelixPreToAttn, cfg, qkv_optimized);
  v.helix_attn_to_post = CommVolume(BoundaryKind::kHelixAttnToPost, cfg, qkv_optimized);
  v.layerwise_boundary = CommVolume(BoundaryKind::kLayerwise, cfg, qkv_optimized);
  return v;
}

DurationTable DurationTable::FromFlops(const ComponentCosts& costs, const CommVolumes& vols,
                                       const DeviceSpec& dev, int64_t sp_size) {
  dev.Validate();
  if (sp_size <= 0) throw ConfigError("sp_size must be positive");
  DurationTable t;
  const double stage_rate = dev.compute_rate * static_cast<double>(sp_size);
  t.seconds_per_tick_ = 1.0 / stage_rate;
  for (Component c : {Component::kPre, Component::kAttn, Component::kPost}) {
    for (PassKind p : {PassKind::kFwd, PassKind::kBwdB, PassKind::kBwdW}) {
      t.SetCompute(c, p, costs.Get(c).Flops(p));
    }
  }
  for (BoundaryKind k : {BoundaryKind::kHelixPreToAttn, BoundaryKind::kHelixAttnToPost,
                         BoundaryKind::kLayerwise}) {
    const double seconds =
        static_cast<double>(vols.Get(k) * dev.bytes_per_element) / dev.link_bandwidth +
        dev.link_latency;
    const double ticks = std::round(seconds * stage_rate);
    if (!(ticks < 0x1p62)) throw ConfigError("transfer time overflows the tick range");
    t.SetComm(k, static_cast<Ticks>(ticks));
  }
  return t;
}

DurationTable DurationTable::FromUnits(Ticks t_pre, Ticks t_attn, Ticks t_post, Ticks comm) {
  if (t_pre < 0 || t_attn < 0 || t_post < 0 || comm < 0) {
    throw ConfigError("unit times must be non-negative");
  }
  DurationTable t;
  t.SetCompute(Component::kPre, PassKind::kFwd, t_pre);
  t.SetCompute(Component::kPre, PassKind::kBwdB, t_pre);
  t.SetCompute(Component::kPre, PassKind::kBwdW, t_pre);
  t.SetCompute(Component::kAttn, PassKind::kFwd, t_attn);
  t.SetCompute(Component::kAttn, PassKind::kBwdB, 2 * t_attn);
  t.SetCompute(Component::kAttn, PassKind::kBwdW, 0);
  t.SetCompute(Component::kPost, PassKind::kFwd, t_post);
  t.SetCompute(Component::kPost, PassKind::kBwdB, t_post);
  t.SetCompute(Component::kPost, PassKind::kBwdW, t_post);
  for (BoundaryKind k : {BoundaryKind::kHelixPreToAttn, BoundaryKind::kHelixAttnToPost,
                         BoundaryKind::kLayerwise}) {
    t.SetComm(k, comm);
  }
  return t;
}

void DurationTable::SetCompute(Component c, PassKind pass, Ticks t) {
  compute_[{c, pass}] = t;
}

void DurationTable::SetComm(BoundaryKind kind, Ticks t) { comm_[kind] = t; }

Ticks DurationTable::Compute(Component c, PassKind pass) const {
  if (c == Component::kChunk) {
    return Compute(Component::kPre, pass) + Compute(Component::kAttn, pass) +
           Compute(Component::kPost, pass);
  }
  auto it = compute_.find({c, pass});
  if (it == compute_.end()) {
    throw std::out_of_range(std::string("no duration for component ") + ComponentName(c));
  }
  return it->second;
}

Ticks DurationTable::Comm(BoundaryKind kind) const {
  auto it = comm_.find(kind);
  if (it == comm_.end()) {
    throw std::out_of_range(std::string("no duration for boundary ") +
                            BoundaryKindName(kind));
  }
  return it->second;
}

}  // namespace pipelab
