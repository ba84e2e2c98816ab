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

#include <gtest/gtest.h>

#include "pipelab/schedule_gen.h"

namespace pipelab {
namespace {

Task Compute(int64_t stage, int64_t mb, Component c = Component::kPre,
             TaskKind k = TaskKind::kFwd) {
  Task t;
  t.stage = stage;
  t.micro_batch = mb;
  t.component = c;
  t.kind = k;
  return t;
}

Schedule Empty(int64_t p) {
  Schedule s;
  s.cfg.pipeline_size = p;
  s.stage_order.resize(p);
  return s;
}

ModelConfig Cfg(int64_t p, int64_t L, int64_t m) {
  ModelConfig c;
  c.num_layers = L;
  c.pipeline_size = p;
  c.num_micro_batches = m;
  c.hidden_size = 8;
  c.num_heads = 2;
  c.seq_length = 4;
  return c;
}

TEST(SimEngine, OneFOneBMakespanByHand) {
  // Unit 1:3:2. Forward chunk = 6 per layer, fused backward = (1+6+2)+(1+0+2) = 12.
  const DurationTable d = DurationTable::FromUnits(1, 3, 2);
  for (int64_t p : {1, 2, 4}) {
    for (int64_t m : {p, 2 * p, 3 * p}) {
      const Schedule s = Gen1F1B(Cfg(p, p, m));
      const SimResult r = Simulate(s, d);
      EXPECT_EQ(r.metrics.makespan, (m + p - 1) * 18) << "p=" << p << " m=" << m;
      for (int64_t st = 0; st < p; ++st) {
        EXPECT_EQ(r.metrics.per_stage_busy[st], m * 18);
        EXPECT_EQ(r.metrics.per_stage_bubble[st], (p - 1) * 18);
      }
      const double expect = static_cast<double>(p - 1) / static_cast<double>(m + p - 1);
      EXPECT_DOUBLE_EQ(r.metrics.bubble_fraction, expect);
    }
  }
}

TEST(SimEngine, OneFOneBPeakMemory) {
  // Stage s holds p - s micro batches of 16bsh = 512 elements per layer.
  const Schedule s = Gen1F1B(Cfg(4, 4, 8));
  const SimResult r = Simulate(s, DurationTable::FromUnits(1, 3, 2));
  ASSERT_EQ(r.metrics.per_stage_peak_activation.size(), 4u);
  for (int64_t st = 0; st < 4; ++st) {
    EXPECT_EQ(r.metrics.per_stage_peak_activation[st], (4 - st) * 512);
    EXPECT_EQ(r.metrics.per_stage_peak_bytes[st], (4 - st) * 512 * 2);
  }
}

TEST(SimEngine, SendAndRecvShareTimes) {
  Schedule s = Empty(2);
  const TaskId a = s.AddTask(Compute(0, 0));
  const TaskId b = s.AddTask(Compute(1, 0, Component::kAttn));
  s.Connect(a, b, BoundaryKind::kHelixPreToAttn, 10, false);
  s.stage_order = {{a}, {b}};
  const SimResult r = Simulate(s, DurationTable::FromUnits(2, 3, 1, 5));
  const Task& send = s.task(s.task(b).deps.front());
  ASSERT_EQ(send.kind, TaskKind::kRecv);
  const TaskId sid = send.peer;
  EXPECT_EQ(r.timeline.start[sid], 2);
  EXPECT_EQ(r.timeline.start[send.id], 2);
  EXPECT_EQ(r.timeline.end[sid], 7);
  EXPECT_EQ(r.timeline.end[send.id], 7);
  EXPECT_EQ(r.timeline.start[b], 7);
  EXPECT_EQ(r.metrics.makespan, 10);

  CommModel off;
  off.enabled = false;
  EXPECT_EQ(Simulate(s, DurationTable::FromUnits(2, 3, 1, 5), off).metrics.makespan, 5);
}

TEST(SimEngine, SendsSerializeOnOneChannel) {
  Schedule s = Empty(2);
  const TaskId a = s.AddTask(Compute(0, 0));
  const TaskId b = s.AddTask(Compute(1, 0));
  const TaskId c = s.AddTask(Compute(1, 1));
  s.Connect(a, b, BoundaryKind::kLayerwise, 1, false);
  s.Connect(a, c, BoundaryKind::kLayerwise, 1, false);
  s.stage_order = {{a}, {b, c}};
  const SimResult r = Simulate(s, DurationTable::FromUnits(1, 1, 1, 5));
  EXPECT_EQ(r.timeline.start[b], 6);
  EXPECT_EQ(r.timeline.start[c], 11);
  EXPECT_EQ(r.metrics.makespan, 12);
}

TEST(SimEngine, ComputeSlowdownWhileChannelBusy) {
  Schedule s = Empty(2);
  const TaskId a = s.AddTask(Compute(0, 0));
  const TaskId a2 = s.AddTask(Compute(0, 1));
  s.task(a2).deps = {a};
  const TaskId b = s.AddTask(Compute(1, 0));
  s.Connect(a, b, BoundaryKind::kLayerwise, 1, false);
  s.stage_order = {{a, a2}, {b}};
  CommModel comm;
  comm.compute_slowdown = 1.5;
  const SimResult r = Simulate(s, DurationTable::FromUnits(3, 1, 1, 5), comm);
  // The transfer occupies [3, 8); a2 starts at 3 and runs ceil(4.5) = 5.
  EXPECT_EQ(r.timeline.start[a2], 3);
  EXPECT_EQ(r.timeline.end[a2], 8);
}

TEST(SimEngine, DeadlockRaisesWithFrontier) {
  Schedule s = Empty(1);
  const TaskId a = s.AddTask(Compute(0, 0));
  const TaskId b = s.AddTask(Compute(0, 1));
  s.task(b).deps = {a};
  s.stage_order = {{b, a}};
  try {
    Simulate(s, DurationTable::FromUnits(1, 1, 1));
    FAIL() << "expected SimulationError";
  } catch (const SimulationError& e) {
    EXPECT_EQ(e.frontier(), std::vector<TaskId>{b});
  }
}

TEST(SimEngine, MissingDurationKeyRaises) {
  Schedule s = Empty(1);
  s.stage_order = {{s.AddTask(Compute(0, 0))}};
  EXPECT_THROW(Simulate(s, DurationTable()), SimulationError);
}

TEST(SimEngine, NegativeMemoryRaises) {
  Schedule s = Empty(1);
  Task t = Compute(0, 0);
  t.mem_delta = -5;
  s.stage_order = {{s.AddTask(t)}};
  EXPECT_THROW(Simulate(s, DurationTable::FromUnits(1, 1, 1)), SimulationError);
}

TEST(SimEngine, MemoryTraceFollowsCompletionOrder) {
  Schedule s = Empty(1);
  Task f = Compute(0, 0);
  f.mem_delta = 7;
  const TaskId a = s.AddTask(f);
  f.micro_batch = 1;
  const TaskId b = s.AddTask(f);
  Task g = Compute(0, 0, Component::kPre, TaskKind::kBwd);
  g.mem_delta = -7;
  g.deps = {a};
  const TaskId c = s.AddTask(g);
  s.stage_order = {{a, c, b}};
  const SimResult r = Simulate(s, DurationTable::FromUnits(1, 1, 1));
  const MemoryTrace mt = ComputeMemoryTrace(r.timeline, s);
  ASSERT_EQ(mt.series[0].size(), 3u);
  EXPECT_EQ(mt.series[0][0], (std::pair<Ticks, int64_t>{1, 7}));
  EXPECT_EQ(mt.series[0][1], (std::pair<Ticks, int64_t>{3, 0}));
  EXPECT_EQ(mt.series[0][2], (std::pair<Ticks, int64_t>{4, 7}));
  EXPECT_EQ(mt.peak[0], 7);
}

TEST(SimEngine, OverlapReportSplitsIdle) {
  Schedule s = Empty(2);
  const TaskId a = s.AddTask(Compute(0, 0));
  const TaskId b = s.AddTask(Compute(1, 0));
  s.Connect(a, b, BoundaryKind::kLayerwise, 1, false);
  s.stage_order = {{a}, {b}};
  const SimResult r = Simulate(s, DurationTable::FromUnits(2, 1, 1, 5));
  const OverlapReport rep = ComputeOverlapReport(r.timeline, s);
  const TaskDelay& d = rep.tasks[1];
  ASSERT_EQ(d.id, b);
  EXPECT_EQ(d.ready_nocomm, 2);
  EXPECT_EQ(d.ready, 7);
  EXPECT_EQ(d.recv_delay, 5);
  EXPECT_EQ(d.dep_wait, 2);
  EXPECT_EQ(rep.total_recv_delay, 5);
  EXPECT_EQ(rep.per_stage_recv_delay[1], 5);
  EXPECT_EQ(rep.RecvDelayForLayers(s, 0, 1), 5);
  EXPECT_EQ(rep.RecvDelayForLayers(s, 1, 2), 0);
}

TEST(SimEngine, DeterministicAcrossRuns) {
  const Schedule s = GenerateSchedule(Method::kHelixTwoFold, Cfg(4, 8, 8));
  const DurationTable d = DurationTable::FromUnits(1, 3, 2, 1);
  const SimResult a = Simulate(s, d);
  const SimResult b = Simulate(s, d);
  EXPECT_EQ(a.timeline.start, b.timeline.start);
  EXPECT_EQ(a.timeline.end, b.timeline.end);
}

TEST(SimEngine, EmptyScheduleHasZeroMakespan) {
  const SimResult r = Simulate(Empty(2), DurationTable::FromUnits(1, 3, 2));
  EXPECT_EQ(r.metrics.makespan, 0);
  EXPECT_EQ(r.metrics.bubble_fraction, 0.0);
}

TEST(SimEngine, FreeTransfersAddNoDelay) {
  const Schedule s = GenerateSchedule(Method::kHelixTwoFold, Cfg(2, 4, 4));
  const SimResult timed = Simulate(s, DurationTable::FromUnits(1, 3, 2, 0));
  const SimResult off = Simulate(s, DurationTable::FromUnits(1, 3, 2, 7), {false});
  EXPECT_EQ(timed.metrics.makespan, off.metrics.makespan);
  EXPECT_EQ(ComputeOverlapReport(timed.timeline, s).total_recv_delay, 0);
}

TEST(SimEngine, SingleStageHasNoBubble) {
  for (Method m : {Method::k1F1B, Method::kZb1p, Method::kHelixNaive, Method::kHelixTwoFold,
                   Method::kHelixTwoFoldRecompute}) {
    const SimResult r = Simulate(GenerateSchedule(m, Cfg(1, 4, 4)),
                                 DurationTable::FromUnits(1, 3, 2, 3));
    EXPECT_EQ(r.metrics.bubble_fraction, 0.0) << MethodName(m);
  }
}

}  // namespace
}  // namespace pipelab
