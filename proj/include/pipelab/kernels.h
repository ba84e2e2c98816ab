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

#ifndef PIPELAB_KERNELS_H_
#define PIPELAB_KERNELS_H_

#include <cstdint>

#include "pipelab/tensor.h"

// Dense float64 kernels for the toy runtime. Every output element is reduced
// in a fixed index order, so the serial and OpenMP variants agree bitwise;
// parallelism only splits independent output rows or (batch, head) pairs.
namespace pipelab::kernels {

enum class Exec { kSerial, kParallel };

// Process-wide default used by the runtime; tests flip it to compare paths.
Exec DefaultExec();
void SetDefaultExec(Exec exec);

// c[n,m] = a[n,k] * b[k,m]
void MatMul(const double* a, const double* b, double* c, int64_t n, int64_t k, int64_t m,
            Exec exec);
// c[n,m] = a[n,k] * b[m,k]^T
void MatMulNT(const double* a, const double* b, double* c, int64_t n, int64_t k, int64_t m,
              Exec exec);
// c[k,m] += a[n,k]^T * b[n,m], rows of a and b folded in ascending order.
void MatMulTNAcc(const double* a, const double* b, double* c, int64_t n, int64_t k,
                 int64_t m, Exec exec);

Tensor MatMul(const Tensor& a, const Tensor& b, Exec exec = DefaultExec());
Tensor MatMulNT(const Tensor& a, const Tensor& b, Exec exec = DefaultExec());
void MatMulTNAcc(const Tensor& a, const Tensor& b, Tensor* c, Exec exec = DefaultExec());

inline constexpr double kLayerNormEps = 1e-5;

// y = (x - mean) * rstd * gain + bias, row-wise over the last dimension.
void LayerNormForward(const Tensor& x, const Tensor& gain, const Tensor& bias, Tensor* y,
                      Tensor* mean, Tensor* rstd);
// Input gradient only.
Tensor LayerNormBackwardInput(const Tensor& dy, const Tensor& x, const Tensor& mean,
                              const Tensor& rstd, const Tensor& gain);
// Parameter gradients, accumulated row by row.
void LayerNormBackwardParams(const Tensor& dy, const Tensor& x, const Tensor& mean,
                             const Tensor& rstd, Tensor* dgain, Tensor* dbias);

// tanh approximation.
void Gelu(const double* h, double* g, int64_t n);
void GeluBackward(const double* h, const double* dg, double* dh, int64_t n);

// qkv is [s*b, 3h] laid out as [Q | K | V]; ctx is [s*b, h].
Tensor CausalAttentionForward(const Tensor& qkv, int64_t batch, int64_t heads,
                              Exec exec = DefaultExec());
// Probabilities are recomputed from qkv; ctx is the forward output.
Tensor CausalAttentionBackward(const Tensor& qkv, const Tensor& ctx, const Tensor& dctx,
                               int64_t batch, int64_t heads, Exec exec = DefaultExec());

void AddInPlace(Tensor* a, const Tensor& b);
Tensor Add(const Tensor& a, const Tensor& b);

}  // namespace pipelab::kernels

#endif  // PIPELAB_KERNELS_H_
