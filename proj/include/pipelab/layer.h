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

#ifndef PIPELAB_LAYER_H_
#define PIPELAB_LAYER_H_

#include <cstdint>
#include <vector>

#include "pipelab/tensor.h"

namespace pipelab {

struct LayerDims {
  int64_t seq = 1;
  int64_t batch = 1;
  int64_t hidden = 1;
  int64_t heads = 1;

  int64_t rows() const { return seq * batch; }
};

// Pre-LN GPT layer without linear biases: 12h^2 + 4h elements.
struct LayerParams {
  Tensor ln1_gain, ln1_bias;  // [h]
  Tensor qkv_weight;          // [h, 3h]
  Tensor o_weight;            // [h, h]
  Tensor ln2_gain, ln2_bias;  // [h]
  Tensor mlp_w1;              // [h, 4h]
  Tensor mlp_w2;              // [4h, h]

  static LayerParams Zeros(int64_t hidden);
  int64_t NumElements() const;
  std::vector<Tensor*> All();
  std::vector<const Tensor*> All() const;
};

// Tensors crossing a component boundary.
struct Message {
  std::vector<Tensor> tensors;
  int64_t numel() const;
};

// Forward payloads:
//   pre -> attn  {y1, qkv_weight, x} with the QKV weight shipped, else {qkv, x}
//   attn -> post {ctx, x}
// Gradient payloads mirror them:
//   post -> attn {dctx, dx2}
//   attn -> pre  {dy1, dqkv_weight, dx2} with the weight shipped, else {dqkv, dx2}
// The residual x rides through the attention stage untouched.

struct PreStash {
  Tensor x, mean, rstd, y1;
};
struct AttnStash {
  Tensor input;       // y1 or qkv
  Tensor qkv_weight;  // shipped weight, empty otherwise
  Tensor ctx;
};
struct PostStash {
  Tensor ctx, x2, mean2, rstd2, y2, hid, act;
  int64_t numel() const;
};

// Retained by backward B for backward W.
struct PreWork {
  Tensor x, mean, rstd, dy1, y1, dqkv, dqkv_weight;
};
struct AttnWork {
  Tensor y1, dqkv;
};
struct PostWork {
  Tensor ctx, dx2, x2, mean2, rstd2, dy2, y2, dhid, act, dout;
};

int64_t NumElements(const PreStash& s);
int64_t NumElements(const AttnStash& s);
int64_t NumElements(const PostStash& s);
int64_t NumElements(const PreWork& w);
int64_t NumElements(const AttnWork& w);
int64_t NumElements(const PostWork& w);

// qkv_in_attention moves the QKV linear to the attention component and ships
// its weight with the layernorm output.
Message PreForward(const LayerParams& w, const Tensor& x, bool qkv_in_attention,
                   PreStash* stash);
Message AttnForward(const Message& in, const LayerDims& dims, bool qkv_in_attention,
                    AttnStash* stash);
// The MLP runs over chunks of chunk_rows rows; 0 means one chunk.
Tensor PostForward(const LayerParams& w, const Message& in, int64_t chunk_rows,
                   PostStash* stash);

Message PostBackwardB(const LayerParams& w, const Tensor& dout, PostStash stash,
                      int64_t chunk_rows, PostWork* work);
void PostBackwardW(PostWork work, int64_t chunk_rows, LayerParams* grads);

// With the shipped weight, W computes the QKV weight gradient on the
// attention side.
Message AttnBackwardB(const Message& grad, AttnStash stash, const LayerDims& dims,
                      bool qkv_in_attention, AttnWork* work);
Tensor AttnBackwardW(AttnWork work);
// B followed by W; the QKV weight gradient joins the payload when shipped.
Message AttnBackward(const Message& grad, AttnStash stash, const LayerDims& dims,
                     bool qkv_in_attention);

Tensor PreBackwardB(const LayerParams& w, const Message& grad, PreStash stash,
                    bool qkv_in_attention, PreWork* work);
void PreBackwardW(PreWork work, bool qkv_in_attention, LayerParams* grads);

// Two-layer GeLU MLP over chunks of c sequence positions (c*batch rows); the
// last chunk takes the remainder. Throws std::invalid_argument if c <= 0.
Tensor ChunkedMlpForward(const Tensor& input, const Tensor& w1, const Tensor& w2, int64_t c,
                         int64_t batch, Tensor* hid = nullptr, Tensor* act = nullptr);

// Entire layer forward and fused backward; used by tests and the oracle.
struct LayerStash {
  PreStash pre;
  AttnStash attn;
  PostStash post;
};
Tensor LayerForward(const LayerParams& w, const Tensor& x, const LayerDims& dims,
                    int64_t chunk_rows, LayerStash* stash);
Tensor LayerBackward(const LayerParams& w, const Tensor& dout, LayerStash stash,
                     const LayerDims& dims, int64_t chunk_rows, LayerParams* grads);

}  // namespace pipelab

#endif  // PIPELAB_LAYER_H_
