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

#include <algorithm>
#include <map>
#include <queue>
#include <sstream>
#include <tuple>

#include "pipelab/schedule_gen.h"

namespace pipelab {

namespace {

ValidationReport Fail(std::string why, std::vector<TaskId> ids) {
  ValidationReport r;
  r.ok = false;
  r.violation = std::move(why);
  r.offending = std::move(ids);
  return r;
}

// Kahn's algorithm; returns the ids left over when the graph has a cycle.
std::vector<TaskId> Leftover(const std::vector<std::vector<TaskId>>& preds) {
  const size_t n = preds.size();
  std::vector<std::vector<TaskId>> succ(n);
  std::vector<int64_t> indeg(n, 0);
  for (size_t t = 0; t < n; ++t) {
    for (TaskId d : preds[t]) {
      succ[d].push_back(static_cast<TaskId>(t));
      ++indeg[t];
    }
  }
  std::queue<TaskId> ready;
  for (size_t t = 0; t < n; ++t) {
    if (indeg[t] == 0) ready.push(static_cast<TaskId>(t));
  }
  size_t seen = 0;
  while (!ready.empty()) {
    const TaskId t = ready.front();
    ready.pop();
    ++seen;
    for (TaskId s : succ[t]) {
      if (--indeg[s] == 0) ready.push(s);
    }
  }
  std::vector<TaskId> left;
  if (seen == n) return left;
  for (size_t t = 0; t < n; ++t) {
    if (indeg[t] > 0) left.push_back(static_cast<TaskId>(t));
  }
  return left;
}

bool Feeds(const Schedule& s, TaskId from, TaskId to) {
  for (TaskId d : s.task(to).deps) {
    if (d == from) return true;
    const Task& r = s.task(d);
    if (r.kind == TaskKind::kRecv && s.task(r.peer).deps.front() == from) return true;
  }
  return false;
}

int Rank(Component c) {
  switch (c) {
    case Component::kPre: return 0;
    case Component::kAttn: return 1;
    case Component::kPost: return 2;
    case Component::kChunk: return 0;
  }
  return 0;
}

}  // namespace

ValidationReport ValidateSchedule(const Schedule& s) {
  const int64_t n = static_cast<int64_t>(s.tasks.size());
  const int64_t p = s.num_stages();

  for (int64_t id = 0; id < n; ++id) {
    const Task& t = s.tasks[id];
    if (t.id != id) return Fail("task id does not match its index", {t.id});
    if (t.stage < 0 || t.stage >= p) return Fail("task stage out of range", {t.id});
    for (TaskId d : t.deps) {
      if (d < 0 || d >= n) return Fail("dependency on unknown task", {t.id});
    }
    for (TaskId d : t.control_deps) {
      if (d < 0 || d >= n || s.task(d).is_comm()) {
        return Fail("control dependency must name a compute task", {t.id});
      }
    }
  }

  // Every compute task appears exactly once, in its own stage's order.
  std::vector<int64_t> pos(n, -1);
  for (int64_t st = 0; st < p; ++st) {
    const auto& order = s.stage_order[st];
    for (size_t k = 0; k < order.size(); ++k) {
      const TaskId id = order[k];
      if (id < 0 || id >= n) return Fail("stage order names unknown task", {id});
      const Task& t = s.task(id);
      if (t.is_comm()) return Fail("communication task in a stage order", {id});
      if (t.stage != st) return Fail("task ordered on a foreign stage", {id});
      if (pos[id] >= 0) return Fail("task ordered twice", {id});
      pos[id] = static_cast<int64_t>(k);
    }
  }
  for (const Task& t : s.tasks) {
    if (!t.is_comm() && pos[t.id] < 0) return Fail("compute task missing from stage order", {t.id});
  }

  // SEND/RECV pairing and stage locality of data edges.
  for (const Task& t : s.tasks) {
    if (t.kind == TaskKind::kSend) {
      if (t.peer < 0 || t.peer >= n) return Fail("SEND without a peer", {t.id});
      const Task& r = s.task(t.peer);
      if (r.kind != TaskKind::kRecv || r.peer != t.id) return Fail("unmatched SEND", {t.id, r.id});
      if (r.volume != t.volume || r.boundary != t.boundary || r.gradient != t.gradient) {
        return Fail("SEND/RECV payload mismatch", {t.id, r.id});
      }
      if (t.deps.size() != 1 || s.task(t.deps[0]).is_comm() ||
          s.task(t.deps[0]).stage != t.stage) {
        return Fail("SEND must depend on one local producer", {t.id});
      }
    } else if (t.kind == TaskKind::kRecv) {
      if (t.peer < 0 || t.peer >= n || s.task(t.peer).kind != TaskKind::kSend ||
          s.task(t.peer).peer != t.id) {
        return Fail("unmatched RECV", {t.id});
      }
      if (t.deps.size() != 1 || t.deps[0] != t.peer) return Fail("RECV must depend on its SEND", {t.id});
      if (t.stage == s.task(t.peer).stage) return Fail("SEND/RECV on the same stage", {t.id});
    } else {
      for (TaskId d : t.deps) {
        const Task& dt = s.task(d);
        if (dt.kind == TaskKind::kSend) return Fail("compute task depends on a SEND", {t.id, d});
        if (dt.stage != t.stage) return Fail("cross-stage dependency without SEND/RECV", {d, t.id});
      }
    }
  }

  // Acyclicity of the dependency graph, then of dependencies plus stage orders.
  std::vector<std::vector<TaskId>> preds(n);
  for (const Task& t : s.tasks) {
    preds[t.id] = t.deps;
    preds[t.id].insert(preds[t.id].end(), t.control_deps.begin(), t.control_deps.end());
  }
  if (auto left = Leftover(preds); !left.empty()) return Fail("cyclic dependencies", left);
  for (const auto& order : s.stage_order) {
    for (size_t k = 1; k < order.size(); ++k) preds[order[k]].push_back(order[k - 1]);
  }
  if (auto left = Leftover(preds); !left.empty()) {
    return Fail("stage order contradicts dependencies (deadlock)", left);
  }

  // Per micro batch program order.
  std::map<int64_t, std::vector<TaskId>> fwd, bwd;
  std::map<std::tuple<int64_t, int64_t, Component>, TaskId> fwd_key, rec_key, b_key;
  for (const Task& t : s.tasks) {
    const auto key = std::make_tuple(t.micro_batch, t.layer, t.component);
    switch (t.kind) {
      case TaskKind::kFwd:
        fwd[t.micro_batch].push_back(t.id);
        fwd_key[key] = t.id;
        break;
      case TaskKind::kBwd:
      case TaskKind::kBwdB:
        bwd[t.micro_batch].push_back(t.id);
        b_key[key] = t.id;
        break;
      case TaskKind::kRecomputeFwd: rec_key[key] = t.id; break;
      default: break;
    }
  }
  auto fwd_less = [&](TaskId a, TaskId b) {
    const Task& x = s.task(a);
    const Task& y = s.task(b);
    return std::make_pair(x.layer, Rank(x.component)) < std::make_pair(y.layer, Rank(y.component));
  };
  for (auto& [mb, chain] : fwd) {
    std::sort(chain.begin(), chain.end(), fwd_less);
    for (size_t k = 1; k < chain.size(); ++k) {
      if (!Feeds(s, chain[k - 1], chain[k])) {
        return Fail("forward program order broken", {chain[k - 1], chain[k]});
      }
    }
  }
  for (auto& [mb, chain] : bwd) {
    std::sort(chain.begin(), chain.end(), fwd_less);
    std::reverse(chain.begin(), chain.end());
    if (!fwd[mb].empty() && !chain.empty() && !Feeds(s, fwd[mb].back(), chain.front())) {
      return Fail("backward does not start from the last forward", {fwd[mb].back(), chain.front()});
    }
    for (size_t k = 1; k < chain.size(); ++k) {
      if (!Feeds(s, chain[k - 1], chain[k])) {
        return Fail("backward program order broken", {chain[k - 1], chain[k]});
      }
    }
  }
  for (const Task& t : s.tasks) {
    const auto key = std::make_tuple(t.micro_batch, t.layer, t.component);
    auto has_dep = [&](const std::map<std::tuple<int64_t, int64_t, Component>, TaskId>& m) {
      auto it = m.find(key);
      return it != m.end() && std::count(t.deps.begin(), t.deps.end(), it->second) > 0;
    };
    if (t.kind == TaskKind::kBwd || t.kind == TaskKind::kBwdB) {
      const bool recomputed = rec_key.count(key) != 0;
      if (recomputed ? !has_dep(rec_key) : !has_dep(fwd_key)) {
        return Fail("backward does not depend on its forward", {t.id});
      }
    } else if (t.kind == TaskKind::kBwdW) {
      if (!has_dep(b_key)) return Fail("BWD_W does not depend on its BWD_B", {t.id});
    } else if (t.kind == TaskKind::kRecomputeFwd) {
      if (!has_dep(fwd_key)) return Fail("recompute does not depend on its forward", {t.id});
    }
  }

  // Memory never goes negative and every stash is released.
  for (int64_t st = 0; st < p; ++st) {
    int64_t live = 0;
    for (TaskId id : s.stage_order[st]) {
      live += s.task(id).mem_delta;
      if (live < 0) return Fail("negative activation memory", {id});
    }
    if (live != 0) {
      std::ostringstream os;
      os << "activation memory leaks " << live << " elements on stage " << st;
      return Fail(os.str(), {});
    }
  }
  return {};
}

}  // namespace pipelab
