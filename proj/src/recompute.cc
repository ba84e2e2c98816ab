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

namespace pipelab {

namespace {

bool IsUnitBackward(const Task& t) {
  return t.kind == TaskKind::kBwd &&
         (t.component == Component::kPre || t.component == Component::kPost);
}

}  // namespace

// A backward unit on a stage is B(pre(l)) followed by B(post(l-1)) of the same
// micro batch, or a lone B(pre(0)) / B(post(L-1)). Its recomputation runs in
// forward order ahead of the whole unit: R(post(l-1)), R(pre(l)), B(pre(l)),
// B(post(l-1)). The first R inherits the unit's incoming gradient edge so it
// cannot run before the backward would have.
Schedule ApplyRecomputation(const Schedule& sched) {
  if (!IsHelix(sched.method)) {
    throw ScheduleError("recomputation applies to helix schedules only");
  }
  if (sched.recomputed) throw ScheduleError("recomputation already applied");

  Schedule out = sched;
  out.recomputed = true;
  const ComponentCosts costs = ComponentFlops(sched.cfg, sched.qkv_optimized);
  for (Task& t : out.tasks) {
    if (t.is_comm()) continue;
    const int64_t stash = costs.Get(t.component).act_recompute;
    if (t.kind == TaskKind::kFwd) t.mem_delta = stash;
    if (t.kind == TaskKind::kBwd) t.mem_delta = -stash;
  }

  // Forward task of (component, micro batch, layer), needed as R's own input.
  std::vector<TaskId> fwd_of_bwd(sched.tasks.size(), kNoTask);
  for (const Task& b : sched.tasks) {
    if (b.kind != TaskKind::kBwd) continue;
    for (TaskId d : b.deps) {
      const Task& f = sched.task(d);
      if (f.kind == TaskKind::kFwd && f.component == b.component &&
          f.micro_batch == b.micro_batch && f.layer == b.layer) {
        fwd_of_bwd[b.id] = d;
      }
    }
  }

  for (auto& order : out.stage_order) {
    std::vector<TaskId> rebuilt;
    rebuilt.reserve(order.size() * 2);
    for (size_t k = 0; k < order.size();) {
      const Task& head = out.task(order[k]);
      if (!IsUnitBackward(head)) {
        rebuilt.push_back(order[k++]);
        continue;
      }
      std::vector<TaskId> unit = {order[k]};
      if (head.component == Component::kPre && k + 1 < order.size()) {
        const Task& next = out.task(order[k + 1]);
        if (IsUnitBackward(next) && next.component == Component::kPost &&
            next.micro_batch == head.micro_batch && next.layer + 1 == head.layer) {
          unit.push_back(order[k + 1]);
        }
      }
      k += unit.size();

      // Recompute in forward order, i.e. the unit reversed.
      std::vector<TaskId> rs(unit.size());
      TaskId prev = kNoTask;
      for (size_t u = unit.size(); u-- > 0;) {
        const Task b = out.task(unit[u]);
        Task r;
        r.stage = b.stage;
        r.micro_batch = b.micro_batch;
        r.layer = b.layer;
        r.kind = TaskKind::kRecomputeFwd;
        r.component = b.component;
        r.deps = {fwd_of_bwd[b.id]};
        if (prev == kNoTask) {
          const Task& first = out.task(unit.front());
          for (TaskId d : first.deps) {
            if (d != fwd_of_bwd[first.id]) r.deps.push_back(d);
          }
          r.control_deps = first.control_deps;
        } else {
          r.deps.push_back(prev);
        }
        prev = out.AddTask(std::move(r));
        rs[u] = prev;
        rebuilt.push_back(prev);
      }
      for (size_t u = 0; u < unit.size(); ++u) {
        out.task(unit[u]).deps.push_back(rs[u]);
        rebuilt.push_back(unit[u]);
      }
    }
    order = std::move(rebuilt);
  }
  return out;
}

}  // namespace pipelab
