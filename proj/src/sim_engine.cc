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

#include "pipelab/sim_engine.h"

#include <algorithm>
#include <cmath>
#include <optional>
#include <tuple>

namespace pipelab {

namespace {

int KindRank(TaskKind k) { return static_cast<int>(k); }

PassKind PassOf(TaskKind k) {
  switch (k) {
    case TaskKind::kBwdB: return PassKind::kBwdB;
    case TaskKind::kBwdW: return PassKind::kBwdW;
    default: return PassKind::kFwd;
  }
}

struct Candidate {
  Ticks start;
  Ticks ready;
  int64_t stage;
  int64_t micro_batch;
  int64_t layer;
  int kind_rank;
  TaskId id;

  auto Key() const {
    return std::make_tuple(start, ready, stage, micro_batch, layer, kind_rank, id);
  }
};

}  // namespace

Ticks TaskDuration(const Task& t, const DurationTable& durations, const CommModel& comm) {
  try {
    if (t.is_comm()) return comm.enabled ? durations.Comm(t.boundary) : 0;
    if (t.kind == TaskKind::kBwd) {
      return t.num_layers * (durations.Compute(t.component, PassKind::kBwdB) +
                             durations.Compute(t.component, PassKind::kBwdW));
    }
    return t.num_layers * durations.Compute(t.component, PassOf(t.kind));
  } catch (const std::out_of_range& e) {
    throw SimulationError(std::string("unresolvable duration key: ") + e.what(), {t.id});
  }
}

SimResult Simulate(const Schedule& sched, const DurationTable& durations,
                   const CommModel& comm) {
  const size_t n = sched.tasks.size();
  const int64_t p = sched.num_stages();
  std::vector<Ticks> dur(n);
  std::vector<std::vector<TaskId>> sends_of(n);
  for (const Task& t : sched.tasks) {
    dur[t.id] = TaskDuration(t, durations, comm);
    if (t.kind == TaskKind::kSend) sends_of[t.deps.front()].push_back(t.id);
  }

  SimResult res;
  Timeline& tl = res.timeline;
  tl.seconds_per_tick = durations.seconds_per_tick();
  tl.start.assign(n, -1);
  tl.end.assign(n, -1);
  std::vector<size_t> ptr(p, 0);
  std::vector<Ticks> exec_free(p, 0), out_free(p, 0), in_free(p, 0);
  std::vector<TaskId> pending;  // SENDs whose producer has been scheduled
  size_t committed = 0;

  auto deps_ready = [&](const Task& t) -> std::optional<Ticks> {
    Ticks ready = 0;
    for (TaskId d : t.deps) {
      if (tl.end[d] < 0) return std::nullopt;
      ready = std::max(ready, tl.end[d]);
    }
    for (TaskId d : t.control_deps) {
      if (tl.end[d] < 0) return std::nullopt;
      ready = std::max(ready, tl.end[d]);
    }
    return ready;
  };

  while (committed < n) {
    std::optional<Candidate> best;
    auto offer = [&](const Candidate& c) {
      if (!best || c.Key() < best->Key()) best = c;
    };
    for (int64_t st = 0; st < p; ++st) {
      if (ptr[st] >= sched.stage_order[st].size()) continue;
      const Task& t = sched.task(sched.stage_order[st][ptr[st]]);
      auto ready = deps_ready(t);
      if (!ready) continue;
      offer({std::max(*ready, exec_free[st]), *ready, st, t.micro_batch, t.layer,
             KindRank(t.kind), t.id});
    }
    for (TaskId sid : pending) {
      const Task& s = sched.task(sid);
      const int64_t dst = sched.task(s.peer).stage;
      const Ticks ready = tl.end[s.deps.front()];
      offer({std::max({ready, out_free[s.stage], in_free[dst]}), ready, s.stage,
             s.micro_batch, s.layer, KindRank(s.kind), sid});
    }
    if (!best) {
      std::vector<TaskId> frontier;
      for (int64_t st = 0; st < p; ++st) {
        if (ptr[st] < sched.stage_order[st].size()) {
          frontier.push_back(sched.stage_order[st][ptr[st]]);
        }
      }
      throw SimulationError("deadlock: no runnable task", frontier);
    }

    const Task& t = sched.task(best->id);
    const Ticks start = best->start;
    if (t.kind == TaskKind::kSend) {
      const Task& r = sched.task(t.peer);
      const Ticks end = start + dur[t.id];
      tl.start[t.id] = tl.start[r.id] = start;
      tl.end[t.id] = tl.end[r.id] = end;
      out_free[t.stage] = end;
      in_free[r.stage] = end;
      pending.erase(std::find(pending.begin(), pending.end(), t.id));
      committed += 2;
      continue;
    }
    Ticks d = dur[t.id];
    if (comm.compute_slowdown != 1.0 && (out_free[t.stage] > start || in_free[t.stage] > start)) {
      d = static_cast<Ticks>(std::ceil(static_cast<double>(d) * comm.compute_slowdown));
    }
    tl.start[t.id] = start;
    tl.end[t.id] = start + d;
    exec_free[t.stage] = start + d;
    ++ptr[t.stage];
    ++committed;
    for (TaskId s : sends_of[t.id]) pending.push_back(s);
  }

  Metrics& m = res.metrics;
  for (Ticks e : tl.end) m.makespan = std::max(m.makespan, e);
  m.per_stage_busy.assign(p, 0);
  for (int64_t st = 0; st < p; ++st) {
    for (TaskId id : sched.stage_order[st]) m.per_stage_busy[st] += tl.end[id] - tl.start[id];
  }
  m.per_stage_bubble.resize(p);
  Ticks total_bubble = 0;
  for (int64_t st = 0; st < p; ++st) {
    m.per_stage_bubble[st] = m.makespan - m.per_stage_busy[st];
    total_bubble += m.per_stage_bubble[st];
  }
  if (m.makespan > 0) {
    m.bubble_fraction = static_cast<double>(total_bubble) /
                        (static_cast<double>(p) * static_cast<double>(m.makespan));
  }
  const MemoryTrace trace = ComputeMemoryTrace(tl, sched);
  m.per_stage_peak_activation = trace.peak;
  for (int64_t peak : trace.peak) m.per_stage_peak_bytes.push_back(peak * comm.bytes_per_element);
  return res;
}

MemoryTrace ComputeMemoryTrace(const Timeline& timeline, const Schedule& sched) {
  const int64_t p = sched.num_stages();
  MemoryTrace trace;
  trace.series.resize(p);
  trace.peak.assign(p, 0);
  for (int64_t st = 0; st < p; ++st) {
    std::vector<std::pair<Ticks, size_t>> events;
    const auto& order = sched.stage_order[st];
    for (size_t k = 0; k < order.size(); ++k) events.push_back({timeline.end.at(order[k]), k});
    std::sort(events.begin(), events.end());
    int64_t live = 0;
    for (auto [when, k] : events) {
      const Task& t = sched.task(order[k]);
      if (t.mem_delta == 0) continue;
      live += t.mem_delta;
      if (live < 0) throw SimulationError("negative activation memory", {t.id});
      trace.series[st].push_back({when, live});
      trace.peak[st] = std::max(trace.peak[st], live);
    }
  }
  return trace;
}

OverlapReport ComputeOverlapReport(const Timeline& timeline, const Schedule& sched) {
  const int64_t p = sched.num_stages();
  OverlapReport rep;
  rep.per_stage_recv_delay.assign(p, 0);
  rep.per_stage_dep_wait.assign(p, 0);
  for (int64_t st = 0; st < p; ++st) {
    Ticks exec_free = 0;
    for (TaskId id : sched.stage_order[st]) {
      const Task& t = sched.task(id);
      TaskDelay d;
      d.id = id;
      d.exec_free = exec_free;
      d.start = timeline.start[id];
      for (TaskId dep : t.deps) {
        d.ready = std::max(d.ready, timeline.end[dep]);
        const Task& dt = sched.task(dep);
        const TaskId src = dt.kind == TaskKind::kRecv ? sched.task(dt.peer).deps.front() : dep;
        d.ready_nocomm = std::max(d.ready_nocomm, timeline.end[src]);
      }
      for (TaskId dep : t.control_deps) {
        d.ready = std::max(d.ready, timeline.end[dep]);
        d.ready_nocomm = std::max(d.ready_nocomm, timeline.end[dep]);
      }
      const Ticks idle = std::max<Ticks>(0, d.start - exec_free);
      d.recv_delay = std::min(idle, std::max<Ticks>(0, d.ready - std::max(exec_free, d.ready_nocomm)));
      d.dep_wait = idle - d.recv_delay;
      d.queue_wait = std::max<Ticks>(0, exec_free - d.ready);
      rep.per_stage_recv_delay[st] += d.recv_delay;
      rep.per_stage_dep_wait[st] += d.dep_wait;
      rep.total_recv_delay += d.recv_delay;
      rep.tasks.push_back(d);
      exec_free = timeline.end[id];
    }
  }
  std::sort(rep.tasks.begin(), rep.tasks.end(),
            [](const TaskDelay& a, const TaskDelay& b) { return a.id < b.id; });
  return rep;
}

Ticks OverlapReport::RecvDelayForLayers(const Schedule& sched, int64_t first,
                                        int64_t last) const {
  Ticks total = 0;
  for (const TaskDelay& d : tasks) {
    const int64_t l = sched.task(d.id).layer;
    if (l >= first && l < last) total += d.recv_delay;
  }
  return total;
}

}  // namespace pipelab
