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

#include "pipelab/experiment.h"

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

namespace pipelab {
namespace {

std::string ConfigPath(const char* name) { return std::string(PIPELAB_CONFIG_DIR) + "/" + name; }

const char* kMinimal =
    "[model]\nlayers = 4\nhidden = 8\nheads = 2\nmicro_batches = 4\npipeline = 2\n"
    "[run]\nmethods = 1f1b\n";

TEST(Experiment, ParseMinimalAndDefaults) {
  const ExperimentConfig c = ParseConfig(kMinimal);
  EXPECT_EQ(c.model.num_layers, 4);
  EXPECT_EQ(c.model.pipeline_size, 2);
  EXPECT_EQ(c.mode, TimeMode::kUnit);
  ASSERT_EQ(c.methods.size(), 1u);
  EXPECT_EQ(c.methods[0], Method::k1F1B);
  EXPECT_EQ(c.t_pre, 1);
  EXPECT_EQ(c.t_attn, 3);
  EXPECT_EQ(c.t_post, 2);
  EXPECT_TRUE(c.qkv_optimization);
  EXPECT_FALSE(c.overlap);
}

TEST(Experiment, ParseErrors) {
  const std::string base = kMinimal;
  EXPECT_THROW(ParseConfig(base + "[bogus]\nx = 1\n"), ConfigError);
  EXPECT_THROW(ParseConfig(base + "[device]\nwarp = 9\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[model]\nlayers = four\n[run]\nmethods = 1f1b\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[model]\nlayers = 4\n[run]\nmethods =\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[model]\nlayers = 4\n"), ConfigError);
  EXPECT_THROW(ParseConfig(base + "mode = quantum\n"), ConfigError);
  EXPECT_THROW(ParseConfig(base + "unit_times = 1 2\n"), ConfigError);
  EXPECT_THROW(ParseConfig(base + "tolerance = -1\n"), ConfigError);
  EXPECT_THROW(ParseConfig(base + "[device]\npreset = tpu\n"), ConfigError);
  EXPECT_THROW(ParseConfig(base + "[sweep]\nseq_length = 0 4\n"), ConfigError);
  EXPECT_THROW(ParseConfig(base + "[overlap]\nmin_seq = 9\nmax_seq = 3\n"), ConfigError);
  EXPECT_THROW(ParseConfig("[model]\nlayers = 4\n[run]\nmethods = 1f1b, gpipe\n"), ConfigError);
  EXPECT_THROW(LoadConfig("/nonexistent/pipelab.ini"), ConfigError);
}

TEST(Experiment, DeviceOverridesApplyAfterPreset) {
  const ExperimentConfig c =
      ParseConfig(std::string(kMinimal) + "[device]\nlink_bandwidth = 5\npreset = a800\n");
  EXPECT_EQ(c.device.link_bandwidth, 5.0);
  EXPECT_EQ(c.device.compute_rate, DeviceSpec::A800Like().compute_rate);
}

TEST(Experiment, SweepPointsNestingAndBudget) {
  ExperimentConfig c = ParseConfig(std::string(kMinimal) +
                                   "[sweep]\nseq_length = 4 8\npipeline = 1 2\n");
  const auto pts = SweepPoints(c, true);
  ASSERT_EQ(pts.size(), 4u);
  EXPECT_EQ(pts[0].pipeline_size, 1);
  EXPECT_EQ(pts[0].seq_length, 4);
  EXPECT_EQ(pts[1].seq_length, 8);
  EXPECT_EQ(pts[2].pipeline_size, 2);
  EXPECT_EQ(SweepPoints(c, false).size(), 1u);
  c.sweep.token_budget = 64;
  const auto budget = SweepPoints(c, true);
  EXPECT_EQ(budget[0].num_micro_batches, 16);
  EXPECT_EQ(budget[1].num_micro_batches, 8);
  c.sweep.token_budget = 2;
  EXPECT_THROW(SweepPoints(c, true), ConfigError);
}

std::map<int64_t, double> BubbleBySeq(const RunSummary& s, Method m) {
  std::map<int64_t, double> out;
  for (const PointResult& r : s.rows) {
    if (r.method == m && r.feasible) out[r.model.seq_length] = r.metrics.bubble_fraction;
  }
  return out;
}

TEST(Experiment, OneFOneBBubbleGrowsWithSeqUnderTokenBudget) {
  ExperimentConfig c = LoadConfig(ConfigPath("seq_sweep_token_budget.ini"));
  c.trace = false;
  c.methods = {Method::k1F1B};
  const auto b = BubbleBySeq(RunPoints(c, SweepPoints(c, true)), Method::k1F1B);
  ASSERT_EQ(b.size(), 5u);
  double prev = -1;
  for (auto [s, f] : b) {
    EXPECT_GT(f, prev) << "s=" << s;
    prev = f;
  }
}

TEST(Experiment, TwoFoldBubbleShrinksWithSeqPastCrossover) {
  ExperimentConfig c = LoadConfig(ConfigPath("seq_sweep_fixed_m.ini"));
  c.trace = false;
  c.methods = {Method::kHelixTwoFold};
  const OverlapThreshold t = FindOverlapThreshold(c.model, c.device, c.qkv_optimization,
                                                  c.overlap_min_seq, c.overlap_max_seq);
  ASSERT_TRUE(t.found);
  const auto b = BubbleBySeq(RunPoints(c, SweepPoints(c, true)), Method::kHelixTwoFold);
  ASSERT_EQ(b.size(), 7u);
  double prev = 2.0;
  int checked = 0;
  for (auto [s, f] : b) {
    if (s < t.seq_length) continue;
    EXPECT_LE(f, prev) << "s=" << s;
    prev = f;
    ++checked;
  }
  EXPECT_GE(checked, 3);
}

// Independent evaluation of the crossover predicate with b = 1.
bool AttnCoversTransfer(int64_t s, int64_t h, int64_t sp, const DeviceSpec& d) {
  const double rate = d.compute_rate * static_cast<double>(sp);
  const double attn = 4.0 * s * s * h + 6.0 * s * h * h;
  const double bytes = (2.0 * s * h + 3.0 * h * h) * static_cast<double>(d.bytes_per_element);
  const double comm = std::llround((bytes / d.link_bandwidth + d.link_latency) * rate);
  return attn >= comm;
}

TEST(Experiment, OverlapThresholdAgainstDirectPredicate) {
  ModelConfig base;
  base.hidden_size = 4096;
  base.num_heads = 32;
  base.sp_size = 8;
  for (const DeviceSpec& d : {DeviceSpec::H20Like(), DeviceSpec::A800Like()}) {
    const OverlapThreshold t = FindOverlapThreshold(base, d, true, 1, 1 << 20);
    ASSERT_TRUE(t.found);
    EXPECT_TRUE(AttnCoversTransfer(t.seq_length, 4096, 8, d));
    EXPECT_FALSE(AttnCoversTransfer(t.seq_length - 1, 4096, 8, d));
    EXPECT_GE(t.attn_ticks, t.comm_ticks);
  }
}

TEST(Experiment, OverlapThresholdMovesWithBandwidth) {
  ModelConfig base;
  base.hidden_size = 4096;
  base.num_heads = 32;
  base.sp_size = 8;
  const DeviceSpec h20 = DeviceSpec::H20Like();
  const int64_t s0 = FindOverlapThreshold(base, h20, true, 1, 1 << 20).seq_length;
  DeviceSpec slow = h20;
  slow.link_bandwidth /= 2;
  EXPECT_GT(FindOverlapThreshold(base, slow, true, 1, 1 << 20).seq_length, s0);
  EXPECT_GT(FindOverlapThreshold(base, DeviceSpec::A800Like(), true, 1, 1 << 20).seq_length,
            s0);
  DeviceSpec free = h20;
  free.link_bandwidth = 1e30;
  free.link_latency = 0;
  EXPECT_EQ(FindOverlapThreshold(base, free, true, 16, 1 << 20).seq_length, 16);
  DeviceSpec awful = h20;
  awful.link_bandwidth = 1e9;
  EXPECT_FALSE(FindOverlapThreshold(base, awful, true, 1, 4096).found);
  awful.link_bandwidth = 1.0;
  EXPECT_THROW(FindOverlapThreshold(base, awful, true, 1, 4096), ConfigError);
  EXPECT_THROW(FindOverlapThreshold(base, h20, true, 10, 5), ConfigError);
}

TEST(Experiment, HelixNaiveBeatsOneFOneBOnSmallUnitConfig) {
  ExperimentConfig c = LoadConfig(ConfigPath("naive_vs_1f1b.ini"));
  c.trace = false;
  const RunSummary s = RunPoints(c, SweepPoints(c, false));
  ASSERT_EQ(s.rows.size(), 2u);
  EXPECT_TRUE(s.all_pass);
  EXPECT_EQ(s.rows[0].method, Method::k1F1B);
  EXPECT_EQ(s.rows[1].method, Method::kHelixNaive);
  EXPECT_LT(s.rows[1].metrics.makespan, s.rows[0].metrics.makespan);
}

TEST(Experiment, CsvIsDeterministicAndMarksInfeasible) {
  ExperimentConfig c = ParseConfig(
      "[model]\nlayers = 6\nhidden = 8\nheads = 2\nseq_length = 4\nmicro_batches = 8\n"
      "pipeline = 2\n[run]\nmethods = 1f1b, helix_twofold\ntrace = false\n"
      "[sweep]\npipeline = 2 4\n");
  std::ostringstream a, b;
  WriteMetricsCsv(RunPoints(c, SweepPoints(c, true)), a);
  WriteMetricsCsv(RunPoints(c, SweepPoints(c, true)), b);
  EXPECT_EQ(a.str(), b.str());
  std::istringstream lines(a.str());
  std::string header, line;
  std::getline(lines, header);
  EXPECT_EQ(header,
            "method,layers,p,m,s,status,makespan,makespan_seconds,bubble_fraction,"
            "bubble_per_stage,peak_activation_per_stage,peak_bytes_per_stage,analytic");
  int infeasible = 0, rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    if (line.find("infeasible") != std::string::npos) ++infeasible;
  }
  // L = 6 is not a multiple of p = 4.
  EXPECT_EQ(rows, 4);
  EXPECT_GE(infeasible, 1);
}

TEST(Experiment, RecomputeToggleSelectsRecomputeVariant) {
  ExperimentConfig c = ParseConfig(
      "[model]\nlayers = 4\nhidden = 8\nheads = 2\nmicro_batches = 4\npipeline = 2\n"
      "[run]\nmethods = helix_twofold\nrecompute = true\ntrace = false\n");
  const RunSummary s = RunPoints(c, SweepPoints(c, false));
  ASSERT_EQ(s.rows.size(), 1u);
  EXPECT_EQ(s.rows[0].method, Method::kHelixTwoFoldRecompute);
}

TEST(Experiment, RuntimeCheckConfigPasses) {
  const ExperimentConfig c = LoadConfig(ConfigPath("runtime_check.ini"));
  const auto rows = RuntimeCheck(c, 0);
  ASSERT_EQ(rows.size(), 5u);
  for (const RuntimeCheckRow& r : rows) EXPECT_TRUE(r.ok) << MethodName(r.method) << r.detail;
}

}  // namespace
}  // namespace pipelab
