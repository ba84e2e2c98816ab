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

#include <gtest/gtest.h>

#include "pipelab/schedule_gen.h"

namespace pipelab {
namespace {

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

TEST(Analytic, BubbleValuesByHand) {
  // p = 4, L = 8, times 1:3:2.
  EXPECT_EQ(BubbleFormula(Method::k1F1B, 4, 8, 1, 3, 2), 3 * 3 * 6 * 2);
  EXPECT_EQ(BubbleFormula(Method::kZb1p, 4, 8, 1, 3, 2), 3 * 12 * 2);
  EXPECT_EQ(BubbleFormula(Method::kHelixNaive, 4, 8, 1, 3, 2), 27);
  EXPECT_EQ(BubbleFormula(Method::kHelixTwoFold, 4, 8, 1, 3, 2), 54);
  EXPECT_EQ(BubbleFormula(Method::kHelixTwoFoldRecompute, 4, 8, 1, 3, 2), 72);
  // Helix does not depend on attention time or on L.
  EXPECT_EQ(BubbleFormula(Method::kHelixTwoFold, 4, 32, 1, 300, 2), 54);
  EXPECT_EQ(BubbleFormula(Method::k1F1B, 1, 8, 1, 3, 2), 0);
  EXPECT_THROW(BubbleFormula(Method::k1F1B, 3, 8, 1, 3, 2), ConfigError);
  EXPECT_THROW(BubbleFormula(Method::kHelixNaive, 0, 8, 1, 3, 2), ConfigError);
}

TEST(Analytic, MemoryValuesByHand) {
  // b=1, s=4, h=8: bsh = 32.
  EXPECT_EQ(MemoryFormula(Method::k1F1B, 0, 4, 8, 1, 4, 8, 8), 16 * 4 * 32 * 2);
  EXPECT_EQ(MemoryFormula(Method::k1F1B, 3, 4, 8, 1, 4, 8, 8), 16 * 1 * 32 * 2);
  EXPECT_EQ(MemoryFormula(Method::kZb1p, 2, 4, 8, 1, 4, 8, 8), 16 * 32 * 8);
  EXPECT_EQ(MemoryFormula(Method::kHelixNaive, 1, 4, 8, 1, 4, 8, 8), 16 * 32 * 8 * 2);
  EXPECT_EQ(MemoryFormula(Method::kHelixTwoFold, 1, 4, 8, 1, 4, 8, 8), 16 * 32 * 8 * 2);
  EXPECT_EQ(MemoryFormula(Method::kHelixTwoFoldRecompute, 1, 4, 8, 1, 4, 8, 8), 4 * 32 * 8 * 2);
  EXPECT_THROW(MemoryFormula(Method::k1F1B, 4, 4, 8, 1, 4, 8, 8), ConfigError);
}

TEST(Analytic, SimulationMatchesFormulasExactly) {
  const Method methods[] = {Method::k1F1B, Method::kZb1p, Method::kHelixNaive,
                            Method::kHelixTwoFold, Method::kHelixTwoFoldRecompute};
  const Ticks ratios[][3] = {{1, 3, 2}, {1, 1, 1}, {2, 5, 1}};
  for (int64_t p : {2, 4}) {
    for (int64_t k : {1, 2}) {
      const ModelConfig c = Cfg(p, k * p, 2 * p);
      for (const auto& r : ratios) {
        const DurationTable d = DurationTable::FromUnits(r[0], r[1], r[2]);
        for (Method m : methods) {
          const SimResult sim = Simulate(GenerateSchedule(m, c), d);
          const CompareReport rep = Compare(Predict(m, c, d), sim.metrics, 0.0);
          EXPECT_TRUE(rep.pass) << MethodName(m) << " p=" << p << " L=" << k * p << " ratio "
                                << r[0] << ":" << r[1] << ":" << r[2] << ": " << rep.detail;
        }
      }
    }
  }
}

Metrics Fake(std::vector<Ticks> bubble, std::vector<int64_t> peak) {
  Metrics m;
  m.per_stage_bubble = std::move(bubble);
  m.per_stage_peak_activation = std::move(peak);
  return m;
}

TEST(Analytic, CompareTolerance) {
  AnalyticPrediction pr;
  pr.method = Method::k1F1B;
  pr.per_stage_bubble = {100, 100};
  pr.per_stage_peak_activation = {200, 100};
  EXPECT_TRUE(Compare(pr, Fake({100, 100}, {200, 100}), 0.0).pass);
  const CompareReport off = Compare(pr, Fake({104, 100}, {200, 100}), 0.0);
  EXPECT_FALSE(off.pass);
  EXPECT_NEAR(off.bubble_rel_error[0], 0.04, 1e-12);
  EXPECT_TRUE(Compare(pr, Fake({104, 100}, {200, 100}), 0.05).pass);
  // Timed transfers: bubbles are not compared, memory still is.
  EXPECT_TRUE(Compare(pr, Fake({500, 0}, {200, 100}), 0.0, false).pass);
  EXPECT_FALSE(Compare(pr, Fake({500, 0}, {201, 100}), 0.0, false).pass);
  EXPECT_THROW(Compare(pr, Fake({1}, {1}), 0.0), ConfigError);
}

TEST(Analytic, CompareZb1pIsABound) {
  AnalyticPrediction pr;
  pr.method = Method::kZb1p;
  pr.per_stage_bubble = {0, 0, 0};
  pr.per_stage_peak_activation = {90, 90, 90};
  EXPECT_TRUE(Compare(pr, Fake({0, 0, 0}, {90, 60, 30}), 0.0).pass);
  EXPECT_FALSE(Compare(pr, Fake({0, 0, 0}, {80, 60, 30}), 0.0).pass);
  EXPECT_FALSE(Compare(pr, Fake({0, 0, 0}, {90, 91, 30}), 0.0).pass);
}

TEST(Analytic, OneFOneBMemoryTable) {
  ModelConfig c;
  c.num_layers = 8;
  c.hidden_size = 1024;
  c.num_heads = 8;
  c.pipeline_size = 2;
  c.num_micro_batches = 4;
  c.sp_size = 2;
  const auto rows = OneFOneBMemoryTable(c, {1024, 2048}, 2, 0.5);
  ASSERT_EQ(rows.size(), 4u);
  // Stage 0 at s=1024: 16 * 2 * 1024 * 1024 * 8 / 2 elements, 2 bytes, split over 2 GPUs.
  EXPECT_EQ(rows[0].elements, int64_t{16} * 2 * 1024 * 1024 * 4);
  EXPECT_DOUBLE_EQ(rows[0].gib_per_gpu, 0.125);
  EXPECT_FALSE(rows[0].exceeds);
  EXPECT_DOUBLE_EQ(rows[1].gib_per_gpu, 0.0625);
  EXPECT_DOUBLE_EQ(rows[2].gib_per_gpu, 0.25);
  EXPECT_EQ(rows[2].seq_length, 2048);
  const auto tight = OneFOneBMemoryTable(c, {2048}, 2, 0.2);
  EXPECT_TRUE(tight[0].exceeds);
  EXPECT_FALSE(tight[1].exceeds);
}

TEST(Analytic, AttentionShareClosedForm) {
  // attention 4bs^2h over 4bs^2h + 24bsh^2 reduces to s / (s + 6h).
  ModelConfig c;
  c.hidden_size = 4096;
  c.num_heads = 32;
  c.sp_size = 8;
  for (int64_t s : {1024, 8192, 24576, 65536, 131072}) {
    c.seq_length = s;
    const double expect = static_cast<double>(s) / static_cast<double>(s + 6 * 4096);
    EXPECT_NEAR(AttentionForwardShare(c, DeviceSpec::H20Like()), expect, 1e-12) << s;
  }
  c.seq_length = 24576;
  EXPECT_NEAR(AttentionForwardShare(c, DeviceSpec::A800Like()), 0.5, 1e-12);
}

}  // namespace
}  // namespace pipelab
