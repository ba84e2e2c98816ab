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

#include "pipelab/layer.h"

#include <algorithm>
#include <stdexcept>

#include "pipelab/kernels.h"

namespace pipelab {

namespace k = kernels;

LayerParams LayerParams::Zeros(int64_t hidden) {
  LayerParams p;
  p.ln1_gain = Tensor({hidden});
  p.ln1_bias = Tensor({hidden});
  p.qkv_weight = Tensor({hidden, 3 * hidden});
  p.o_weight = Tensor({hidden, hidden});
  p.ln2_gain = Tensor({hidden});
  p.ln2_bias = Tensor({hidden});
  p.mlp_w1 = Tensor({hidden, 4 * hidden});
  p.mlp_w2 = Tensor({4 * hidden, hidden});
  return p;
}

std::vector<Tensor*> LayerParams::All() {
  return {&ln1_gain, &ln1_bias, &qkv_weight, &o_weight, &ln2_gain, &ln2_bias, &mlp_w1, &mlp_w2};
}

std::vector<const Tensor*> LayerParams::All() const {
  return {&ln1_gain, &ln1_bias, &qkv_weight, &o_weight, &ln2_gain, &ln2_bias, &mlp_w1, &mlp_w2};
}

int64_t LayerParams::NumElements() const {
  int64_t n = 0;
  for (const Tensor* t : All()) n += t->numel();
  return n;
}

int64_t Message::numel() const {
  int64_t n = 0;
  for (const Tensor& t : tensors) n += t.numel();
  return n;
}

int64_t NumElements(const PreStash& s) {
  return s.x.numel() + s.mean.numel() + s.rstd.numel() + s.y1.numel();
}
int64_t NumElements(const AttnStash& s) {
  return s.input.numel() + s.qkv_weight.numel() + s.ctx.numel();
}
int64_t NumElements(const PostStash& s) { return s.numel(); }
int64_t PostStash::numel() const {
  return ctx.numel() + x2.numel() + mean2.numel() + rstd2.numel() + y2.numel() + hid.numel() +
         act.numel();
}
int64_t NumElements(const PreWork& w) {
  return w.x.numel() + w.mean.numel() + w.rstd.numel() + w.dy1.numel() + w.y1.numel() +
         w.dqkv.numel() + w.dqkv_weight.numel();
}
int64_t NumElements(const AttnWork& w) { return w.y1.numel() + w.dqkv.numel(); }
int64_t NumElements(const PostWork& w) {
  return w.ctx.numel() + w.dx2.numel() + w.x2.numel() + w.mean2.numel() + w.rstd2.numel() +
         w.dy2.numel() + w.y2.numel() + w.dhid.numel() + w.act.numel() + w.dout.numel();
}

namespace {

void Expect(const Message& m, size_t n, const char* what) {
  if (m.tensors.size() != n) {
    throw std::invalid_argument(std::string("malformed payload for ") + what);
  }
}

// Row slice [r0, r1) of a 2-D tensor.
Tensor Rows(const Tensor& t, int64_t r0, int64_t r1) {
  const int64_t c = t.cols();
  Tensor out({r1 - r0, c});
  std::copy(t.ptr() + r0 * c, t.ptr() + r1 * c, out.ptr());
  return out;
}

void PutRows(const Tensor& src, int64_t r0, Tensor* dst) {
  std::copy(src.data.begin(), src.data.end(), dst->ptr() + r0 * dst->cols());
}

int64_t ChunkSize(int64_t chunk_rows, int64_t rows) {
  return chunk_rows <= 0 ? rows : std::min(chunk_rows, rows);
}

}  // namespace

namespace {

Tensor MlpForwardRows(const Tensor& input, const Tensor& w1, const Tensor& w2,
                      int64_t chunk_rows, Tensor* hid, Tensor* act) {
  const int64_t n = input.rows(), ff = w1.cols();
  Tensor out({n, w2.cols()});
  if (hid) *hid = Tensor({n, ff});
  if (act) *act = Tensor({n, ff});
  const int64_t c = ChunkSize(chunk_rows, n);
  for (int64_t r0 = 0; r0 < n; r0 += c) {
    const int64_t r1 = std::min(n, r0 + c);
    Tensor h = k::MatMul(Rows(input, r0, r1), w1);
    Tensor g(h.shape);
    k::Gelu(h.ptr(), g.ptr(), h.numel());
    PutRows(k::MatMul(g, w2), r0, &out);
    if (hid) PutRows(h, r0, hid);
    if (act) PutRows(g, r0, act);
  }
  return out;
}

}  // namespace

Tensor ChunkedMlpForward(const Tensor& input, const Tensor& w1, const Tensor& w2, int64_t c,
                         int64_t batch, Tensor* hid, Tensor* act) {
  if (c <= 0) throw std::invalid_argument("MLP chunk size must be positive");
  if (batch <= 0 || input.rows() % batch != 0) {
    throw std::invalid_argument("MLP input rows must be a multiple of the batch");
  }
  return MlpForwardRows(input, w1, w2, c * batch, hid, act);
}

Message PreForward(const LayerParams& w, const Tensor& x, bool qkv_in_attention,
                   PreStash* stash) {
  Tensor y1, mean, rstd;
  k::LayerNormForward(x, w.ln1_gain, w.ln1_bias, &y1, &mean, &rstd);
  Message out;
  if (qkv_in_attention) {
    out.tensors = {y1, w.qkv_weight, x};
  } else {
    out.tensors = {k::MatMul(y1, w.qkv_weight), x};
  }
  if (stash) {
    stash->x = x;
    stash->mean = std::move(mean);
    stash->rstd = std::move(rstd);
    // The QKV weight gradient needs y1 only where the linear lives.
    if (!qkv_in_attention) stash->y1 = std::move(y1);
  }
  return out;
}

Message AttnForward(const Message& in, const LayerDims& dims, bool qkv_in_attention,
                    AttnStash* stash) {
  Expect(in, qkv_in_attention ? 3 : 2, "attention forward");
  Tensor qkv = qkv_in_attention ? k::MatMul(in.tensors[0], in.tensors[1]) : in.tensors[0];
  Tensor ctx = k::CausalAttentionForward(qkv, dims.batch, dims.heads);
  if (stash) {
    stash->input = in.tensors[0];
    if (qkv_in_attention) stash->qkv_weight = in.tensors[1];
    stash->ctx = ctx;
  }
  Message out;
  out.tensors = {std::move(ctx), in.tensors.back()};
  return out;
}

Tensor PostForward(const LayerParams& w, const Message& in, int64_t chunk_rows,
                   PostStash* stash) {
  Expect(in, 2, "post forward");
  const Tensor& ctx = in.tensors[0];
  Tensor x2 = k::Add(in.tensors[1], k::MatMul(ctx, w.o_weight));
  Tensor y2, mean2, rstd2;
  k::LayerNormForward(x2, w.ln2_gain, w.ln2_bias, &y2, &mean2, &rstd2);
  Tensor hid, act;
  Tensor out = k::Add(x2, MlpForwardRows(y2, w.mlp_w1, w.mlp_w2, chunk_rows,
                                         stash ? &hid : nullptr, stash ? &act : nullptr));
  if (stash) {
    stash->ctx = ctx;
    stash->x2 = std::move(x2);
    stash->mean2 = std::move(mean2);
    stash->rstd2 = std::move(rstd2);
    stash->y2 = std::move(y2);
    stash->hid = std::move(hid);
    stash->act = std::move(act);
  }
  return out;
}

Message PostBackwardB(const LayerParams& w, const Tensor& dout, PostStash stash,
                      int64_t chunk_rows, PostWork* work) {
  const int64_t n = dout.rows();
  Tensor dhid({n, w.mlp_w1.cols()});
  Tensor dy2({n, dout.cols()});
  const int64_t c = ChunkSize(chunk_rows, n);
  for (int64_t r0 = 0; r0 < n; r0 += c) {
    const int64_t r1 = std::min(n, r0 + c);
    Tensor dact = k::MatMulNT(Rows(dout, r0, r1), w.mlp_w2);
    Tensor h = Rows(stash.hid, r0, r1);
    Tensor dh(h.shape);
    k::GeluBackward(h.ptr(), dact.ptr(), dh.ptr(), h.numel());
    PutRows(k::MatMulNT(dh, w.mlp_w1), r0, &dy2);
    PutRows(dh, r0, &dhid);
  }
  Tensor dx2 = k::Add(dout, k::LayerNormBackwardInput(dy2, stash.x2, stash.mean2, stash.rstd2,
                                                      w.ln2_gain));
  Message out;
  out.tensors = {k::MatMulNT(dx2, w.o_weight), dx2};
  if (work) {
    work->ctx = std::move(stash.ctx);
    work->dx2 = std::move(dx2);
    work->x2 = std::move(stash.x2);
    work->mean2 = std::move(stash.mean2);
    work->rstd2 = std::move(stash.rstd2);
    work->dy2 = std::move(dy2);
    work->y2 = std::move(stash.y2);
    work->dhid = std::move(dhid);
    work->act = std::move(stash.act);
    work->dout = dout;
  }
  return out;
}

void PostBackwardW(PostWork work, int64_t chunk_rows, LayerParams* grads) {
  const int64_t n = work.dout.rows();
  const int64_t c = ChunkSize(chunk_rows, n);
  // Row-ordered accumulation makes the chunked sums identical to one pass.
  for (int64_t r0 = 0; r0 < n; r0 += c) {
    const int64_t r1 = std::min(n, r0 + c);
    k::MatMulTNAcc(Rows(work.act, r0, r1), Rows(work.dout, r0, r1), &grads->mlp_w2);
    k::MatMulTNAcc(Rows(work.y2, r0, r1), Rows(work.dhid, r0, r1), &grads->mlp_w1);
  }
  k::LayerNormBackwardParams(work.dy2, work.x2, work.mean2, work.rstd2, &grads->ln2_gain,
                             &grads->ln2_bias);
  k::MatMulTNAcc(work.ctx, work.dx2, &grads->o_weight);
}

Message AttnBackwardB(const Message& grad, AttnStash stash, const LayerDims& dims,
                      bool qkv_in_attention, AttnWork* work) {
  Expect(grad, 2, "attention backward");
  Tensor qkv = qkv_in_attention ? k::MatMul(stash.input, stash.qkv_weight) : stash.input;
  Tensor dqkv = k::CausalAttentionBackward(qkv, stash.ctx, grad.tensors[0], dims.batch,
                                           dims.heads);
  Message out;
  if (qkv_in_attention) {
    out.tensors = {k::MatMulNT(dqkv, stash.qkv_weight), grad.tensors[1]};
    if (work) {
      work->y1 = std::move(stash.input);
      work->dqkv = std::move(dqkv);
    }
  } else {
    out.tensors = {std::move(dqkv), grad.tensors[1]};
  }
  return out;
}

Tensor AttnBackwardW(AttnWork work) {
  if (work.y1.empty()) throw std::invalid_argument("attention W pass without QKV work");
  Tensor dw({work.y1.cols(), work.dqkv.cols()});
  k::MatMulTNAcc(work.y1, work.dqkv, &dw);
  return dw;
}

Message AttnBackward(const Message& grad, AttnStash stash, const LayerDims& dims,
                     bool qkv_in_attention) {
  AttnWork work;
  Message out = AttnBackwardB(grad, std::move(stash), dims, qkv_in_attention, &work);
  if (qkv_in_attention) {
    out.tensors.insert(out.tensors.begin() + 1, AttnBackwardW(std::move(work)));
  }
  return out;
}

Tensor PreBackwardB(const LayerParams& w, const Message& grad, PreStash stash,
                    bool qkv_in_attention, PreWork* work) {
  Tensor dy1;
  Tensor dqkv, dqkv_weight;
  if (qkv_in_attention) {
    Expect(grad, 3, "pre backward");
    dy1 = grad.tensors[0];
    dqkv_weight = grad.tensors[1];
  } else {
    Expect(grad, 2, "pre backward");
    dqkv = grad.tensors[0];
    dy1 = k::MatMulNT(dqkv, w.qkv_weight);
  }
  Tensor dx = k::Add(grad.tensors.back(),
                     k::LayerNormBackwardInput(dy1, stash.x, stash.mean, stash.rstd, w.ln1_gain));
  if (work) {
    work->x = std::move(stash.x);
    work->mean = std::move(stash.mean);
    work->rstd = std::move(stash.rstd);
    work->dy1 = std::move(dy1);
    work->y1 = std::move(stash.y1);
    work->dqkv = std::move(dqkv);
    work->dqkv_weight = std::move(dqkv_weight);
  }
  return dx;
}

void PreBackwardW(PreWork work, bool qkv_in_attention, LayerParams* grads) {
  k::LayerNormBackwardParams(work.dy1, work.x, work.mean, work.rstd, &grads->ln1_gain,
                             &grads->ln1_bias);
  if (qkv_in_attention) {
    k::AddInPlace(&grads->qkv_weight, work.dqkv_weight);
  } else {
    k::MatMulTNAcc(work.y1, work.dqkv, &grads->qkv_weight);
  }
}

Tensor LayerForward(const LayerParams& w, const Tensor& x, const LayerDims& dims,
                    int64_t chunk_rows, LayerStash* stash) {
  Message a = PreForward(w, x, false, stash ? &stash->pre : nullptr);
  Message b = AttnForward(a, dims, false, stash ? &stash->attn : nullptr);
  return PostForward(w, b, chunk_rows, stash ? &stash->post : nullptr);
}

Tensor LayerBackward(const LayerParams& w, const Tensor& dout, LayerStash stash,
                     const LayerDims& dims, int64_t chunk_rows, LayerParams* grads) {
  PostWork post_work;
  Message g = PostBackwardB(w, dout, std::move(stash.post), chunk_rows, &post_work);
  PostBackwardW(std::move(post_work), chunk_rows, grads);
  g = AttnBackwardB(g, std::move(stash.attn), dims, false, nullptr);
  PreWork pre_work;
  Tensor dx = PreBackwardB(w, g, std::move(stash.pre), false, &pre_work);
  PreBackwardW(std::move(pre_work), false, grads);
  return dx;
}

}  // namespace pipelab
