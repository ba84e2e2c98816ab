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

#include "pipelab/schedule.h"

#include <sstream>

namespace pipelab {

namespace {
constexpr TaskKind kAllKinds[] = {TaskKind::kFwd,  TaskKind::kBwdB,
                                  TaskKind::kBwdW, TaskKind::kBwd,
                                  TaskKind::kRecomputeFwd, TaskKind::kSend,
                                  TaskKind::kRecv};
constexpr Method kAllMethods[] = {Method::k1F1B, Method::kZb1p, Method::kHelixNaive,
                                  Method::kHelixTwoFold,
                                  Method::kHelixTwoFoldRecompute};
}  // namespace

const char* TaskKindName(TaskKind k) {
  switch (k) {
    case TaskKind::kFwd: return "FWD";
    case TaskKind::kBwdB: return "BWD_B";
    case TaskKind::kBwdW: return "BWD_W";
    case TaskKind::kBwd: return "BWD";
    case TaskKind::kRecomputeFwd: return "RECOMPUTE_FWD";
    case TaskKind::kSend: return "SEND";
    case TaskKind::kRecv: return "RECV";
  }
  return "?";
}

TaskKind ParseTaskKind(const std::string& name) {
  for (TaskKind k : kAllKinds) {
    if (name == TaskKindName(k)) return k;
  }
  throw ConfigError("unknown task kind: " + name);
}

const char* MethodName(Method m) {
  switch (m) {
    case Method::k1F1B: return "1f1b";
    case Method::kZb1p: return "zb1p";
    case Method::kHelixNaive: return "helix_naive";
    case Method::kHelixTwoFold: return "helix_twofold";
    case Method::kHelixTwoFoldRecompute: return "helix_twofold_recompute";
  }
  return "?";
}

Method ParseMethod(const std::string& name) {
  for (Method m : kAllMethods) {
    if (name == MethodName(m)) return m;
  }
  throw ConfigError("unknown method: " + name);
}

bool IsHelix(Method m) { return m != Method::k1F1B && m != Method::kZb1p; }

std::string Task::Label() const {
  std::ostringstream os;
  os << TaskKindName(kind);
  if (!is_comm()) os << '(' << ComponentName(component);
  else os << '(' << BoundaryKindName(boundary) << (gradient ? ",grad" : "");
  os << ",i=" << micro_batch << ",l=" << layer;
  if (num_layers > 1) os << ".." << layer + num_layers - 1;
  os << ')';
  return os.str();
}

TaskId Schedule::AddTask(Task t) {
  t.id = static_cast<TaskId>(tasks.size());
  tasks.push_back(std::move(t));
  return tasks.back().id;
}

void Schedule::Connect(TaskId producer, TaskId consumer, BoundaryKind kind, int64_t volume,
                       bool gradient) {
  const Task& p = task(producer);
  const Task& c = task(consumer);
  if (p.stage == c.stage) {
    task(consumer).deps.push_back(producer);
    return;
  }
  Task send;
  send.stage = p.stage;
  send.micro_batch = p.micro_batch;
  send.layer = p.layer;
  send.num_layers = p.num_layers;
  send.kind = TaskKind::kSend;
  send.component = p.component;
  send.boundary = kind;
  send.volume = volume;
  send.gradient = gradient;
  send.deps = {producer};
  Task recv = send;
  recv.stage = c.stage;
  recv.kind = TaskKind::kRecv;
  const TaskId s = AddTask(std::move(send));
  recv.deps = {s};
  const TaskId r = AddTask(std::move(recv));
  task(s).peer = r;
  task(r).peer = s;
  task(consumer).deps.push_back(r);
}

Method Schedule::EffectiveMethod() const {
  if (recomputed && method == Method::kHelixTwoFold) return Method::kHelixTwoFoldRecompute;
  return method;
}

}  // namespace pipelab
