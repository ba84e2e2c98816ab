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

#include "pipelab/schedule_gen.h"

#include <algorithm>
#include <array>
#include <deque>

namespace pipelab {

namespace {

void CheckLayerwise(const ModelConfig& cfg, const GenOptions& opts) {
  cfg.Validate();
  if (cfg.num_layers % cfg.pipeline_size != 0) {
    throw ConfigError("num_layers must be divisible by pipeline_size");
  }
  if (cfg.num_micro_batches < cfg.pipeline_size && !opts.allow_unsaturated) {
    throw ConfigError("num_micro_batches < pipeline_size (set allow_unsaturated)");
  }
}

struct LayerwiseTasks {
  std::vector<std::vector<TaskId>> fwd;  // [stage][mb]
  std::vector<std::vector<TaskId>> bwd;  // fused BWD or BWD_B
  std::vector<std::vector<TaskId>> wgt;  // BWD_W, split mode only
};

LayerwiseTasks BuildLayerwise(Schedule& s, bool split) {
  const ModelConfig& cfg = s.cfg;
  const int64_t p = cfg.pipeline_size, m = cfg.num_micro_batches;
  const int64_t k = cfg.num_layers / p;
  const int64_t chunk_mem = ActivationElements(cfg, false) * k;
  const int64_t vol = CommVolume(BoundaryKind::kLayerwise, cfg, false);

  LayerwiseTasks t;
  t.fwd.assign(p, std::vector<TaskId>(m));
  t.bwd.assign(p, std::vector<TaskId>(m));
  if (split) t.wgt.assign(p, std::vector<TaskId>(m));
  auto make = [&](int64_t st, int64_t i, TaskKind kind, int64_t mem) {
    Task x;
    x.stage = st;
    x.micro_batch = i;
    x.layer = st * k;
    x.num_layers = k;
    x.kind = kind;
    x.component = Component::kChunk;
    x.mem_delta = mem;
    return s.AddTask(std::move(x));
  };
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t st = 0; st < p; ++st) {
      t.fwd[st][i] = make(st, i, TaskKind::kFwd, chunk_mem);
      if (st > 0) {
        s.Connect(t.fwd[st - 1][i], t.fwd[st][i], BoundaryKind::kLayerwise, vol, false);
      }
    }
    for (int64_t st = p - 1; st >= 0; --st) {
      const TaskId b = make(st, i, split ? TaskKind::kBwdB : TaskKind::kBwd,
                            split ? 0 : -chunk_mem);
      t.bwd[st][i] = b;
      s.task(b).deps.push_back(t.fwd[st][i]);
      if (st + 1 < p) {
        s.Connect(t.bwd[st + 1][i], b, BoundaryKind::kLayerwise, vol, true);
      }
      if (split) {
        const TaskId w = make(st, i, TaskKind::kBwdW, -chunk_mem);
        s.task(w).deps.push_back(b);
        t.wgt[st][i] = w;
      }
    }
  }
  return t;
}

// F/B interleaving of 1F1B on one stage: (is_forward, micro batch) pairs.
std::vector<std::pair<bool, int64_t>> OneFOneBSequence(int64_t p, int64_t m, int64_t stage) {
  std::vector<std::pair<bool, int64_t>> seq;
  const int64_t warmup = std::min(p - stage - 1, m);
  int64_t f = 0, b = 0;
  for (; f < warmup; ++f) seq.push_back({true, f});
  while (f < m) {
    seq.push_back({true, f++});
    seq.push_back({false, b++});
  }
  while (b < m) seq.push_back({false, b++});
  return seq;
}

}  // namespace

Schedule Gen1F1B(const ModelConfig& cfg, const GenOptions& opts) {
  CheckLayerwise(cfg, opts);
  Schedule s;
  s.method = Method::k1F1B;
  s.cfg = cfg;
  const int64_t p = cfg.pipeline_size;
  LayerwiseTasks t = BuildLayerwise(s, false);
  s.stage_order.resize(p);
  for (int64_t st = 0; st < p; ++st) {
    for (auto [fwd, i] : OneFOneBSequence(p, cfg.num_micro_batches, st)) {
      s.stage_order[st].push_back(fwd ? t.fwd[st][i] : t.bwd[st][i]);
    }
  }
  return s;
}

Schedule GenZb1p(const ModelConfig& cfg, const GenOptions& opts) {
  CheckLayerwise(cfg, opts);
  Schedule s;
  s.method = Method::kZb1p;
  s.cfg = cfg;
  const int64_t p = cfg.pipeline_size, m = cfg.num_micro_batches;
  const int64_t chunk_mem = ActivationElements(cfg, false) * (cfg.num_layers / p);
  const int64_t cap = opts.memory_cap.value_or(ActivationElements(cfg, false) * cfg.num_layers);
  if (cap < chunk_mem) throw ScheduleError("memory cap below one micro batch of activations");
  LayerwiseTasks t = BuildLayerwise(s, true);
  s.stage_order.resize(p);
  for (int64_t st = 0; st < p; ++st) {
    std::vector<TaskId>& order = s.stage_order[st];
    std::deque<int64_t> pending;  // W indices whose B is done
    int64_t live = 0;
    auto emit_w = [&]() {
      order.push_back(t.wgt[st][pending.front()]);
      pending.pop_front();
      live -= chunk_mem;
    };
    for (auto [fwd, i] : OneFOneBSequence(p, m, st)) {
      if (fwd) {
        while (live + chunk_mem > cap && !pending.empty()) emit_w();
        if (live + chunk_mem > cap) {
          throw ScheduleError("memory cap infeasible at stage " + std::to_string(st));
        }
        order.push_back(t.fwd[st][i]);
        live += chunk_mem;
      } else {
        order.push_back(t.bwd[st][i]);
        pending.push_back(i);
        while (!pending.empty() && pending.front() <= i - st) emit_w();
      }
    }
    while (!pending.empty()) emit_w();
  }
  return s;
}

namespace {

// Helix task ids of one micro batch, indexed [layer][component].
struct HelixMicroBatch {
  std::vector<std::array<TaskId, 3>> fwd;
  std::vector<std::array<TaskId, 3>> bwd;
};

int CompIndex(Component c) {
  return c == Component::kPre ? 0 : c == Component::kAttn ? 1 : 2;
}

Schedule GenHelix(const ModelConfig& cfg, const HelixAssignment& part,
                  const GenOptions& opts, int64_t fold) {
  cfg.Validate();
  const int64_t p = cfg.pipeline_size, m = cfg.num_micro_batches, L = cfg.num_layers;
  if (part.num_stages != p || part.num_layers != L) {
    throw ConfigError("partition does not match the model config");
  }
  const int64_t per_loop = p * fold;
  if (m % per_loop != 0) {
    throw ConfigError("num_micro_batches must be divisible by " + std::to_string(per_loop));
  }
  if (L % p != 0) {
    throw ConfigError("helix schedules need num_layers divisible by pipeline_size");
  }

  Schedule s;
  s.method = fold == 1 ? Method::kHelixNaive : Method::kHelixTwoFold;
  s.cfg = cfg;
  s.qkv_optimized = opts.qkv_optimized;
  s.stage_order.resize(p);

  const ComponentCosts costs = ComponentFlops(cfg, opts.qkv_optimized);
  const int64_t vol_pa = CommVolume(BoundaryKind::kHelixPreToAttn, cfg, opts.qkv_optimized);
  const int64_t vol_ap = CommVolume(BoundaryKind::kHelixAttnToPost, cfg, opts.qkv_optimized);
  const Component comps[3] = {Component::kPre, Component::kAttn, Component::kPost};
  auto stage_of = [&](Component c, int64_t l, int64_t i) {
    switch (c) {
      case Component::kPre: return part.PreStage(l);
      case Component::kAttn: return part.AttnStage(l, i);
      default: return part.PostStage(l);
    }
  };

  std::vector<HelixMicroBatch> ids(m);
  for (int64_t i = 0; i < m; ++i) {
    HelixMicroBatch& mb = ids[i];
    mb.fwd.resize(L);
    mb.bwd.resize(L);
    for (int64_t l = 0; l < L; ++l) {
      for (int c = 0; c < 3; ++c) {
        Task f;
        f.stage = stage_of(comps[c], l, i);
        f.micro_batch = i;
        f.layer = l;
        f.kind = TaskKind::kFwd;
        f.component = comps[c];
        f.mem_delta = costs.Get(comps[c]).act_full;
        Task b = f;
        b.kind = TaskKind::kBwd;
        b.mem_delta = -f.mem_delta;
        mb.fwd[l][c] = s.AddTask(std::move(f));
        mb.bwd[l][c] = s.AddTask(std::move(b));
        s.task(mb.bwd[l][c]).deps.push_back(mb.fwd[l][c]);
      }
    }
    // Forward chain, then the loss edge, then the backward chain.
    for (int64_t l = 0; l < L; ++l) {
      if (l > 0) s.task(mb.fwd[l][0]).deps.push_back(mb.fwd[l - 1][2]);
      s.Connect(mb.fwd[l][0], mb.fwd[l][1], BoundaryKind::kHelixPreToAttn, vol_pa, false);
      s.Connect(mb.fwd[l][1], mb.fwd[l][2], BoundaryKind::kHelixAttnToPost, vol_ap, false);
    }
    for (int64_t l = L - 1; l >= 0; --l) {
      if (l + 1 < L) s.task(mb.bwd[l][2]).deps.push_back(mb.bwd[l + 1][0]);
      s.Connect(mb.bwd[l][2], mb.bwd[l][1], BoundaryKind::kHelixAttnToPost, vol_ap, true);
      s.Connect(mb.bwd[l][1], mb.bwd[l][0], BoundaryKind::kHelixPreToAttn, vol_pa, true);
    }
  }

  // Loops are chained into one helix of V virtual layers; stage sigma owns
  // virtual positions v with v % p == sigma.
  const int64_t loops = m / per_loop;
  const int64_t V = loops * L;
  auto mb_of = [&](int64_t loop, int64_t slot, int64_t f) {
    return loop * per_loop + f * p + slot;
  };
  auto fwd_of = [&](int64_t x, int64_t slot, int64_t f, int c) {
    return ids[mb_of(x / L, slot, f)].fwd[x % L][c];
  };
  auto bwd_of = [&](int64_t x, int64_t slot, int64_t f, int c) {
    return ids[mb_of(x / L, slot, f)].bwd[x % L][c];
  };
  for (int64_t sigma = 0; sigma < p; ++sigma) {
    std::vector<TaskId>& order = s.stage_order[sigma];
    for (int64_t v = sigma; v < V + p; v += p) {
      for (int64_t slot = p - 1; slot >= 0; --slot) {
        const int64_t x = v - 1 - slot;
        if (x < 0 || x >= V) continue;
        for (int64_t f = 0; f < fold; ++f) order.push_back(fwd_of(x, slot, f, 1));
      }
      if (v > V) continue;
      for (int64_t slot = 0; slot < p; ++slot) {
        for (int64_t f = 0; f < fold; ++f) {
          if (v > 0) order.push_back(fwd_of(v - 1, slot, f, 2));
          if (v < V) order.push_back(fwd_of(v, slot, f, 0));
        }
      }
    }
    for (int64_t w = V + p - 1; w > -p; --w) {
      if (((w % p) + p) % p != sigma) continue;
      for (int64_t j = p - 1; j >= 0; --j) {
        const int64_t x = w + j;
        if (x < 0 || x >= V) continue;
        for (int64_t f = fold - 1; f >= 0; --f) order.push_back(bwd_of(x, p - 1 - j, f, 1));
      }
      if (w < 0 || w > V) continue;
      for (int64_t slot = p - 1; slot >= 0; --slot) {
        for (int64_t f = fold - 1; f >= 0; --f) {
          if (w < V) order.push_back(bwd_of(w, slot, f, 0));
          if (w > 0) order.push_back(bwd_of(w - 1, slot, f, 2));
        }
      }
    }
  }

  if (fold == 2) {
    // Fold barrier: the first task of a fold pair on a stage may not start
    // before the producer of its sibling's remote input has finished.
    std::vector<int64_t> pos(s.tasks.size(), -1);
    for (const auto& order : s.stage_order) {
      for (size_t k = 0; k < order.size(); ++k) pos[order[k]] = static_cast<int64_t>(k);
    }
    auto sibling = [&](TaskId id) {
      const Task& t = s.task(id);
      const int64_t r = t.micro_batch % per_loop;
      const int64_t other = r < p ? t.micro_batch + p : t.micro_batch - p;
      const HelixMicroBatch& mb = ids[other];
      const int c = CompIndex(t.component);
      return t.kind == TaskKind::kFwd ? mb.fwd[t.layer][c] : mb.bwd[t.layer][c];
    };
    std::vector<std::pair<TaskId, TaskId>> ctrl;
    for (const auto& order : s.stage_order) {
      for (TaskId id : order) {
        const TaskId sib = sibling(id);
        if (pos[sib] > pos[id]) continue;
        for (TaskId d : s.task(id).deps) {
          if (s.task(d).kind != TaskKind::kRecv) continue;
          const TaskId producer = s.task(s.task(d).deps.front()).deps.front();
          ctrl.push_back({sib, producer});
        }
      }
    }
    for (auto [t, producer] : ctrl) s.task(t).control_deps.push_back(producer);
  }
  return s;
}

}  // namespace

Schedule GenHelixNaive(const ModelConfig& cfg, const HelixAssignment& partition,
                       const GenOptions& opts) {
  return GenHelix(cfg, partition, opts, 1);
}

Schedule GenHelixTwoFold(const ModelConfig& cfg, const HelixAssignment& partition,
                         const GenOptions& opts) {
  return GenHelix(cfg, partition, opts, 2);
}

Schedule GenerateSchedule(Method method, const ModelConfig& cfg, const GenOptions& opts) {
  switch (method) {
    case Method::k1F1B: return Gen1F1B(cfg, opts);
    case Method::kZb1p: return GenZb1p(cfg, opts);
    case Method::kHelixNaive:
      return GenHelixNaive(
          cfg, HelixPartition(cfg.num_layers, cfg.pipeline_size, cfg.num_micro_batches), opts);
    case Method::kHelixTwoFold:
      return GenHelixTwoFold(
          cfg, HelixPartition(cfg.num_layers, cfg.pipeline_size, cfg.num_micro_batches), opts);
    case Method::kHelixTwoFoldRecompute:
      return ApplyRecomputation(GenerateSchedule(Method::kHelixTwoFold, cfg, opts));
  }
  throw ConfigError("unknown method");
}

}  // namespace pipelab
