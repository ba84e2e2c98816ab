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

#include <gtest/gtest.h>

#include <random>

namespace pipelab {
namespace {

ModelConfig RandomConfig(std::mt19937_64& rng) {
  std::uniform_int_distribution<int64_t> heads(1, 16), per_head(1, 64), b(1, 4), s(1, 4096);
  ModelConfig c;
  c.num_heads = heads(rng);
  c.hidden_size = c.num_heads * per_head(rng);
  c.micro_batch_size = b(rng);
  c.seq_length = s(rng);
  c.num_layers = 4;
  c.pipeline_size = 2;
  c.num_micro_batches = 4;
  return c;
}

TEST(CostModel, LayerTotalsOverRandomConfigs) {
  std::mt19937_64 rng(20260101);
  for (int trial = 0; trial < 1500; ++trial) {
    const ModelConfig c = RandomConfig(rng);
    const int64_t b = c.micro_batch_size, s = c.seq_length, h = c.hidden_size;
    const int64_t bsh = b * s * h;
    for (bool qkv : {false, true}) {
      const ComponentCosts k = ComponentFlops(c, qkv);
      ASSERT_EQ(k.TotalFwd(), 4 * bsh * (6 * h + s));
      ASSERT_EQ(k.TotalBwdB(), 4 * bsh * (6 * h + 2 * s));
      ASSERT_EQ(k.TotalBwdW(), 24 * bsh * h);
      ASSERT_EQ(k.TotalActFull(), 16 * bsh);
      ASSERT_EQ(k.TotalActRecompute(), 4 * bsh);
    }
    ASSERT_EQ(ActivationElements(c, false), 16 * bsh);
    ASSERT_EQ(ActivationElements(c, true), 4 * bsh);
    ASSERT_EQ(CommVolume(BoundaryKind::kHelixPreToAttn, c, true), 2 * bsh + 3 * h * h);
    ASSERT_EQ(CommVolume(BoundaryKind::kHelixPreToAttn, c, false), 4 * bsh);
    ASSERT_EQ(CommVolume(BoundaryKind::kHelixAttnToPost, c, true), 2 * bsh);
    ASSERT_EQ(CommVolume(BoundaryKind::kLayerwise, c, true), bsh);
  }
}

TEST(CostModel, ComponentSplit) {
  ModelConfig c;
  c.hidden_size = 8;
  c.num_heads = 2;
  c.seq_length = 16;
  c.micro_batch_size = 2;
  const int64_t bsh = 2 * 16 * 8, h = 8, s = 16;
  const ComponentCosts off = ComponentFlops(c, false);
  EXPECT_EQ(off.pre.fwd_flops, 6 * bsh * h);
  EXPECT_EQ(off.attn.fwd_flops, 4 * bsh * s);
  EXPECT_EQ(off.attn.bwd_b_flops, 8 * bsh * s);
  EXPECT_EQ(off.attn.bwd_w_flops, 0);
  EXPECT_EQ(off.post.fwd_flops, 18 * bsh * h);
  const ComponentCosts on = ComponentFlops(c, true);
  EXPECT_EQ(on.pre.fwd_flops, 0);
  EXPECT_EQ(on.attn.fwd_flops, 4 * bsh * s + 6 * bsh * h);
  EXPECT_EQ(on.attn.bwd_w_flops, 6 * bsh * h);
  EXPECT_EQ(on.attn.act_recompute, 2 * bsh);
  EXPECT_EQ(ComponentFlops(c, true, true).attn.act_recompute, 2 * bsh + 3 * h * h);
}

TEST(CostModel, DurationsFromUnits) {
  const DurationTable t = DurationTable::FromUnits(1, 3, 2, 5);
  EXPECT_EQ(t.Compute(Component::kPre, PassKind::kBwdB), 1);
  EXPECT_EQ(t.Compute(Component::kAttn, PassKind::kBwdB), 6);
  EXPECT_EQ(t.Compute(Component::kAttn, PassKind::kBwdW), 0);
  EXPECT_EQ(t.Compute(Component::kPost, PassKind::kBwdW), 2);
  EXPECT_EQ(t.Compute(Component::kChunk, PassKind::kFwd), 6);
  EXPECT_EQ(t.Comm(BoundaryKind::kHelixAttnToPost), 5);
  EXPECT_THROW(DurationTable::FromUnits(-1, 3, 2), ConfigError);
}

TEST(CostModel, DurationsFromFlopsScaleWithTheStageRate) {
  ModelConfig c;
  c.hidden_size = 1024;
  c.num_heads = 8;
  c.seq_length = 2048;
  c.sp_size = 4;
  DeviceSpec dev;
  dev.compute_rate = 1e12;
  dev.link_bandwidth = 1e9;
  dev.link_latency = 1e-6;
  const DurationTable t = DurationTable::FromFlops(ComponentFlops(c, true),
                                                   ComputeCommVolumes(c, true), dev, 4);
  EXPECT_EQ(t.Compute(Component::kPost, PassKind::kFwd), ComponentFlops(c, true).post.fwd_flops);
  EXPECT_DOUBLE_EQ(t.seconds_per_tick(), 1.0 / 4e12);
  const double secs = (2.0 * c.bsh() + 3.0 * 1024 * 1024) * 2 / 1e9 + 1e-6;
  EXPECT_EQ(t.Comm(BoundaryKind::kHelixPreToAttn), std::llround(secs * 4e12));
}

TEST(CostModel, PointValues) {
  ModelConfig c;
  c.hidden_size = 4;
  c.num_heads = 1;
  c.seq_length = 2;
  EXPECT_EQ(ComponentFlops(c, false).attn.bwd_b_flops, 128);

  c.hidden_size = 1024;
  c.num_heads = 8;
  c.seq_length = 2048;
  DeviceSpec dev;
  const auto attn_fwd = [&](int64_t s) {
    ModelConfig x = c;
    x.seq_length = s;
    const DurationTable t = DurationTable::FromFlops(ComponentFlops(x, false),
                                                     ComputeCommVolumes(x, false), dev, 1);
    return t.Compute(Component::kAttn, PassKind::kFwd);
  };
  EXPECT_EQ(attn_fwd(4096), 4 * attn_fwd(2048));
  const DurationTable t = DurationTable::FromFlops(ComponentFlops(c, false),
                                                   ComputeCommVolumes(c, false), dev, 1);
  EXPECT_EQ(t.Compute(Component::kAttn, PassKind::kBwdW), 0);
}

TEST(CostModel, RejectsBadConfigs) {
  ModelConfig c;
  c.hidden_size = 10;
  c.num_heads = 3;
  EXPECT_THROW(c.Validate(), ConfigError);
  c.num_heads = 2;
  c.seq_length = 0;
  EXPECT_THROW(ComponentFlops(c, false), ConfigError);
  DeviceSpec d;
  d.link_bandwidth = 0;
  EXPECT_THROW(d.Validate(), ConfigError);
}

TEST(CostModel, MissingDurationKeyThrows) {
  DurationTable t;
  EXPECT_THROW(t.Compute(Component::kPre, PassKind::kFwd), std::out_of_range);
}

TEST(CostModel, NamesRoundTrip) {
  for (Component c : {Component::kPre, Component::kAttn, Component::kPost, Component::kChunk}) {
    EXPECT_EQ(ParseComponent(ComponentName(c)), c);
  }
  for (BoundaryKind k : {BoundaryKind::kHelixPreToAttn, BoundaryKind::kHelixAttnToPost,
                         BoundaryKind::kLayerwise}) {
    EXPECT_EQ(ParseBoundaryKind(BoundaryKindName(k)), k);
  }
  EXPECT_THROW(ParseComponent("mlp"), ConfigError);
}

}  // namespace
}  // namespace pipelab
