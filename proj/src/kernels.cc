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

#include "pipelab/kernels.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace pipelab::kernels {

namespace {

std::atomic<Exec> g_default_exec{Exec::kParallel};

void CheckShape(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("shape mismatch in ") + what);
}

}  // namespace

Exec DefaultExec() { return g_default_exec.load(); }
void SetDefaultExec(Exec exec) { g_default_exec.store(exec); }

void MatMul(const double* a, const double* b, double* c, int64_t n, int64_t k, int64_t m,
            Exec exec) {
#pragma omp parallel for schedule(static) if (exec == Exec::kParallel)
  for (int64_t i = 0; i < n; ++i) {
    double* ci = c + i * m;
    for (int64_t j = 0; j < m; ++j) ci[j] = 0.0;
    const double* ai = a + i * k;
    for (int64_t kk = 0; kk < k; ++kk) {
      const double av = ai[kk];
      const double* bk = b + kk * m;
      for (int64_t j = 0; j < m; ++j) ci[j] += av * bk[j];
    }
  }
}

void MatMulNT(const double* a, const double* b, double* c, int64_t n, int64_t k, int64_t m,
              Exec exec) {
#pragma omp parallel for schedule(static) if (exec == Exec::kParallel)
  for (int64_t i = 0; i < n; ++i) {
    const double* ai = a + i * k;
    for (int64_t j = 0; j < m; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (int64_t kk = 0; kk < k; ++kk) acc += ai[kk] * bj[kk];
      c[i * m + j] = acc;
    }
  }
}

void MatMulTNAcc(const double* a, const double* b, double* c, int64_t n, int64_t k,
                 int64_t m, Exec exec) {
#pragma omp parallel for schedule(static) if (exec == Exec::kParallel)
  for (int64_t r = 0; r < k; ++r) {
    double* cr = c + r * m;
    for (int64_t i = 0; i < n; ++i) {
      const double av = a[i * k + r];
      const double* bi = b + i * m;
      for (int64_t j = 0; j < m; ++j) cr[j] += av * bi[j];
    }
  }
}

Tensor MatMul(const Tensor& a, const Tensor& b, Exec exec) {
  CheckShape(a.cols() == b.rows(), "MatMul");
  Tensor c({a.rows(), b.cols()});
  MatMul(a.ptr(), b.ptr(), c.ptr(), a.rows(), a.cols(), b.cols(), exec);
  return c;
}

Tensor MatMulNT(const Tensor& a, const Tensor& b, Exec exec) {
  CheckShape(a.cols() == b.cols(), "MatMulNT");
  Tensor c({a.rows(), b.rows()});
  MatMulNT(a.ptr(), b.ptr(), c.ptr(), a.rows(), a.cols(), b.rows(), exec);
  return c;
}

void MatMulTNAcc(const Tensor& a, const Tensor& b, Tensor* c, Exec exec) {
  CheckShape(a.rows() == b.rows() && c->rows() == a.cols() && c->cols() == b.cols(),
             "MatMulTNAcc");
  MatMulTNAcc(a.ptr(), b.ptr(), c->ptr(), a.rows(), a.cols(), b.cols(), exec);
}

void LayerNormForward(const Tensor& x, const Tensor& gain, const Tensor& bias, Tensor* y,
                      Tensor* mean, Tensor* rstd) {
  const int64_t n = x.rows(), h = x.cols();
  CheckShape(gain.numel() == h && bias.numel() == h, "LayerNormForward");
  *y = Tensor({n, h});
  *mean = Tensor({n});
  *rstd = Tensor({n});
  for (int64_t i = 0; i < n; ++i) {
    const double* xi = x.ptr() + i * h;
    double sum = 0.0;
    for (int64_t j = 0; j < h; ++j) sum += xi[j];
    const double mu = sum / static_cast<double>(h);
    double var = 0.0;
    for (int64_t j = 0; j < h; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= static_cast<double>(h);
    const double rs = 1.0 / std::sqrt(var + kLayerNormEps);
    mean->data[i] = mu;
    rstd->data[i] = rs;
    double* yi = y->ptr() + i * h;
    for (int64_t j = 0; j < h; ++j) yi[j] = (xi[j] - mu) * rs * gain.data[j] + bias.data[j];
  }
}

Tensor LayerNormBackwardInput(const Tensor& dy, const Tensor& x, const Tensor& mean,
                              const Tensor& rstd, const Tensor& gain) {
  const int64_t n = x.rows(), h = x.cols();
  CheckShape(dy.shape == x.shape, "LayerNormBackwardInput");
  Tensor dx({n, h});
  std::vector<double> xhat(h), dxhat(h);
  for (int64_t i = 0; i < n; ++i) {
    const double* xi = x.ptr() + i * h;
    const double* dyi = dy.ptr() + i * h;
    double a = 0.0, c = 0.0;
    for (int64_t j = 0; j < h; ++j) {
      xhat[j] = (xi[j] - mean.data[i]) * rstd.data[i];
      dxhat[j] = dyi[j] * gain.data[j];
      a += dxhat[j];
      c += dxhat[j] * xhat[j];
    }
    a /= static_cast<double>(h);
    c /= static_cast<double>(h);
    double* dxi = dx.ptr() + i * h;
    for (int64_t j = 0; j < h; ++j) dxi[j] = rstd.data[i] * (dxhat[j] - a - xhat[j] * c);
  }
  return dx;
}

void LayerNormBackwardParams(const Tensor& dy, const Tensor& x, const Tensor& mean,
                             const Tensor& rstd, Tensor* dgain, Tensor* dbias) {
  const int64_t n = x.rows(), h = x.cols();
  CheckShape(dy.shape == x.shape && dgain->numel() == h && dbias->numel() == h,
             "LayerNormBackwardParams");
  for (int64_t i = 0; i < n; ++i) {
    const double* xi = x.ptr() + i * h;
    const double* dyi = dy.ptr() + i * h;
    for (int64_t j = 0; j < h; ++j) {
      const double xhat = (xi[j] - mean.data[i]) * rstd.data[i];
      dgain->data[j] += dyi[j] * xhat;
      dbias->data[j] += dyi[j];
    }
  }
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

void Gelu(const double* h, double* g, int64_t n) {
  for (int64_t i = 0; i < n; ++i) {
    const double x = h[i];
    g[i] = 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
  }
}

void GeluBackward(const double* h, const double* dg, double* dh, int64_t n) {
  for (int64_t i = 0; i < n; ++i) {
    const double x = h[i];
    const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
    const double d = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
    dh[i] = dg[i] * d;
  }
}

namespace {

// Softmax row of position t over keys 0..t for one (batch, head).
void Probabilities(const Tensor& qkv, int64_t t, int64_t bb, int64_t batch, int64_t col,
                   int64_t dh, double scale, std::vector<double>* p) {
  const int64_t w = qkv.cols(), h = w / 3;
  const double* q = qkv.ptr() + (t * batch + bb) * w + col;
  p->assign(t + 1, 0.0);
  double mx = -INFINITY;
  for (int64_t u = 0; u <= t; ++u) {
    const double* k = qkv.ptr() + (u * batch + bb) * w + h + col;
    double dot = 0.0;
    for (int64_t d = 0; d < dh; ++d) dot += q[d] * k[d];
    (*p)[u] = dot * scale;
    mx = std::max(mx, (*p)[u]);
  }
  double sum = 0.0;
  for (int64_t u = 0; u <= t; ++u) {
    (*p)[u] = std::exp((*p)[u] - mx);
    sum += (*p)[u];
  }
  for (int64_t u = 0; u <= t; ++u) (*p)[u] /= sum;
}

}  // namespace

Tensor CausalAttentionForward(const Tensor& qkv, int64_t batch, int64_t heads, Exec exec) {
  const int64_t rows = qkv.rows(), w = qkv.cols(), h = w / 3;
  CheckShape(w % 3 == 0 && h % heads == 0 && rows % batch == 0, "CausalAttentionForward");
  const int64_t s = rows / batch, dh = h / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor ctx({rows, h});
#pragma omp parallel for schedule(static) if (exec == Exec::kParallel)
  for (int64_t pair = 0; pair < batch * heads; ++pair) {
    const int64_t bb = pair / heads, col = (pair % heads) * dh;
    std::vector<double> p;
    for (int64_t t = 0; t < s; ++t) {
      Probabilities(qkv, t, bb, batch, col, dh, scale, &p);
      double* out = ctx.ptr() + (t * batch + bb) * h + col;
      for (int64_t u = 0; u <= t; ++u) {
        const double* v = qkv.ptr() + (u * batch + bb) * w + 2 * h + col;
        for (int64_t d = 0; d < dh; ++d) out[d] += p[u] * v[d];
      }
    }
  }
  return ctx;
}

Tensor CausalAttentionBackward(const Tensor& qkv, const Tensor& ctx, const Tensor& dctx,
                               int64_t batch, int64_t heads, Exec exec) {
  const int64_t rows = qkv.rows(), w = qkv.cols(), h = w / 3;
  CheckShape(ctx.rows() == rows && ctx.cols() == h && dctx.shape == ctx.shape,
             "CausalAttentionBackward");
  const int64_t s = rows / batch, dh = h / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor dqkv({rows, w});
#pragma omp parallel for schedule(static) if (exec == Exec::kParallel)
  for (int64_t pair = 0; pair < batch * heads; ++pair) {
    const int64_t bb = pair / heads, col = (pair % heads) * dh;
    std::vector<double> p, ds;
    for (int64_t t = 0; t < s; ++t) {
      Probabilities(qkv, t, bb, batch, col, dh, scale, &p);
      const int64_t rt = t * batch + bb;
      const double* go = dctx.ptr() + rt * h + col;
      const double* o = ctx.ptr() + rt * h + col;
      double delta = 0.0;
      for (int64_t d = 0; d < dh; ++d) delta += go[d] * o[d];
      ds.assign(t + 1, 0.0);
      for (int64_t u = 0; u <= t; ++u) {
        const double* v = qkv.ptr() + (u * batch + bb) * w + 2 * h + col;
        double dp = 0.0;
        for (int64_t d = 0; d < dh; ++d) dp += go[d] * v[d];
        ds[u] = p[u] * (dp - delta);
      }
      const double* q = qkv.ptr() + rt * w + col;
      double* dq = dqkv.ptr() + rt * w + col;
      for (int64_t u = 0; u <= t; ++u) {
        const int64_t ru = u * batch + bb;
        const double* k = qkv.ptr() + ru * w + h + col;
        double* dk = dqkv.ptr() + ru * w + h + col;
        double* dv = dqkv.ptr() + ru * w + 2 * h + col;
        for (int64_t d = 0; d < dh; ++d) {
          dq[d] += ds[u] * k[d];
          dk[d] += ds[u] * q[d];
          dv[d] += p[u] * go[d];
        }
      }
      for (int64_t d = 0; d < dh; ++d) dq[d] *= scale;
    }
  }
  // dK picked up unscaled terms above.
  for (int64_t r = 0; r < rows; ++r) {
    double* dk = dqkv.ptr() + r * w + h;
    for (int64_t j = 0; j < h; ++j) dk[j] *= scale;
  }
  return dqkv;
}

void AddInPlace(Tensor* a, const Tensor& b) {
  CheckShape(a->shape == b.shape, "AddInPlace");
  for (int64_t i = 0; i < a->numel(); ++i) a->data[i] += b.data[i];
}

Tensor Add(const Tensor& a, const Tensor& b) {
  Tensor c = a;
  AddInPlace(&c, b);
  return c;
}

}  // namespace pipelab::kernels
