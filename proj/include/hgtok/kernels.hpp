#pragma once

// Dense kernels shared by the projector, the overview aggregation and the toy LM.
//
// Every kernel has two implementations with identical signatures:
//   hgtok::kernels::            OpenMP data-parallel version used by the pipeline
//   hgtok::kernels::reference:: plain serial loops, kept as the test oracle
// The parallel versions only split independent output rows/columns across
// threads, so results are deterministic for any thread count.

#include <cmath>
#include <cstddef>
#include <span>

#include "hgtok/hypergraph.hpp"
#include "hgtok/tensor.hpp"

namespace hgtok::kernels {

inline constexpr double kLnEps = 1e-5;

template <class T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * T(0.70710678118654752440)));
}

template <class T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x * T(0.70710678118654752440)));
  const T pdf = T(0.39894228040143267794) * std::exp(T(-0.5) * x * x);
  return cdf + x * pdf;
}

// ---------------------------------------------------------------------------
// Serial reference implementations.
// ---------------------------------------------------------------------------
namespace reference {

// y = x * w^T + bias. w is out x in; bias may be empty.
template <class T>
void linear(ConstMatrixView<T> x, ConstMatrixView<T> w, std::span<const T> bias, MatrixView<T> y) {
  assert(x.cols == w.cols && y.rows == x.rows && y.cols == w.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t o = 0; o < w.rows; ++o) {
      T acc = bias.empty() ? T(0) : bias[o];
      for (std::size_t k = 0; k < x.cols; ++k) acc += x(r, k) * w(o, k);
      y(r, o) = acc;
    }
  }
}

// Accumulates dx += dy * w, dw += dy^T * x, db += colsum(dy). Null targets are skipped.
template <class T>
void linear_backward(ConstMatrixView<T> x, ConstMatrixView<T> w, ConstMatrixView<T> dy, MatrixView<T> dx,
                     MatrixView<T> dw, std::span<T> db) {
  for (std::size_t r = 0; r < dy.rows; ++r) {
    for (std::size_t o = 0; o < dy.cols; ++o) {
      const T g = dy(r, o);
      if (!dx.empty())
        for (std::size_t k = 0; k < w.cols; ++k) dx(r, k) += g * w(o, k);
      if (!dw.empty())
        for (std::size_t k = 0; k < x.cols; ++k) dw(o, k) += g * x(r, k);
      if (!db.empty()) db[o] += g;
    }
  }
}

// Row-wise layer norm. xhat and rstd (per row) are saved for the backward pass.
template <class T>
void layer_norm(ConstMatrixView<T> x, std::span<const T> gamma, std::span<const T> beta, MatrixView<T> y,
                MatrixView<T> xhat, std::span<T> rstd) {
  const std::size_t n = x.cols;
  for (std::size_t r = 0; r < x.rows; ++r) {
    T mean = 0;
    for (std::size_t k = 0; k < n; ++k) mean += x(r, k);
    mean /= T(n);
    T var = 0;
    for (std::size_t k = 0; k < n; ++k) var += (x(r, k) - mean) * (x(r, k) - mean);
    var /= T(n);
    const T rs = T(1) / std::sqrt(var + T(kLnEps));
    rstd[r] = rs;
    for (std::size_t k = 0; k < n; ++k) {
      const T xh = (x(r, k) - mean) * rs;
      xhat(r, k) = xh;
      y(r, k) = gamma[k] * xh + beta[k];
    }
  }
}

// dx (accumulated) from dy; dgamma/dbeta accumulated.
template <class T>
void layer_norm_backward(ConstMatrixView<T> dy, ConstMatrixView<T> xhat, std::span<const T> rstd,
                         std::span<const T> gamma, MatrixView<T> dx, std::span<T> dgamma, std::span<T> dbeta) {
  const std::size_t n = dy.cols;
  for (std::size_t r = 0; r < dy.rows; ++r) {
    T mean_g = 0, mean_gx = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const T g = dy(r, k) * gamma[k];
      mean_g += g;
      mean_gx += g * xhat(r, k);
      dgamma[k] += dy(r, k) * xhat(r, k);
      dbeta[k] += dy(r, k);
    }
    mean_g /= T(n);
    mean_gx /= T(n);
    for (std::size_t k = 0; k < n; ++k) {
      const T g = dy(r, k) * gamma[k];
      dx(r, k) += rstd[r] * (g - mean_g - xhat(r, k) * mean_gx);
    }
  }
}

// Causal multi-head attention over a packed qkv matrix (T x 3d: [q | k | v]).
// probs is heads x T x T (row t holds weights over positions <= t).
template <class T>
void causal_attention(ConstMatrixView<T> qkv, std::size_t heads, MatrixView<T> out, MatrixView<T> probs) {
  const std::size_t len = qkv.rows, d = qkv.cols / 3, hd = d / heads;
  const T scale = T(1) / std::sqrt(T(hd));
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t t = 0; t < len; ++t) {
      T* p = &probs(h * len + t, 0);
      T mx = -INFINITY;
      for (std::size_t s = 0; s <= t; ++s) {
        T acc = 0;
        for (std::size_t k = 0; k < hd; ++k) acc += qkv(t, h * hd + k) * qkv(s, d + h * hd + k);
        p[s] = acc * scale;
        mx = std::max(mx, p[s]);
      }
      T z = 0;
      for (std::size_t s = 0; s <= t; ++s) {
        p[s] = std::exp(p[s] - mx);
        z += p[s];
      }
      for (std::size_t s = 0; s <= t; ++s) p[s] /= z;
      for (std::size_t k = 0; k < hd; ++k) {
        T acc = 0;
        for (std::size_t s = 0; s <= t; ++s) acc += p[s] * qkv(s, 2 * d + h * hd + k);
        out(t, h * hd + k) = acc;
      }
    }
  }
}

// dqkv accumulated.
template <class T>
void causal_attention_backward(ConstMatrixView<T> qkv, std::size_t heads, ConstMatrixView<T> probs,
                               ConstMatrixView<T> dout, MatrixView<T> dqkv) {
  const std::size_t len = qkv.rows, d = qkv.cols / 3, hd = d / heads;
  const T scale = T(1) / std::sqrt(T(hd));
  std::vector<T> dp(len);
  for (std::size_t h = 0; h < heads; ++h) {
    for (std::size_t t = 0; t < len; ++t) {
      const T* p = &probs(h * len + t, 0);
      T dot = 0;
      for (std::size_t s = 0; s <= t; ++s) {
        T acc = 0;
        for (std::size_t k = 0; k < hd; ++k) {
          acc += dout(t, h * hd + k) * qkv(s, 2 * d + h * hd + k);
          dqkv(s, 2 * d + h * hd + k) += p[s] * dout(t, h * hd + k);
        }
        dp[s] = acc;
        dot += p[s] * acc;
      }
      for (std::size_t s = 0; s <= t; ++s) {
        const T ds = p[s] * (dp[s] - dot) * scale;
        for (std::size_t k = 0; k < hd; ++k) {
          dqkv(t, h * hd + k) += ds * qkv(s, d + h * hd + k);
          dqkv(s, d + h * hd + k) += ds * qkv(t, h * hd + k);
        }
      }
    }
  }
}

// One hyperedge half-step of the alternating mean propagation:
// estate[e] = mean of vstate over members(e).
template <class T>
void hyperedge_mean(const Hypergraph& h, ConstMatrixView<T> vstate, MatrixView<T> estate) {
  for (Index e = 0; e < h.num_hyperedges(); ++e) {
    auto m = h.members(e);
    for (std::size_t k = 0; k < estate.cols; ++k) {
      T acc = 0;
      for (Index v : m) acc += vstate(v, k);
      estate(e, k) = acc / T(m.size());
    }
  }
}

// Vertex half-step: vstate[v] = mean over incident e of (estate[e] + offsets[bucket[e]]).
// Vertices without incident hyperedges keep vprev.
template <class T>
void vertex_mean_with_offsets(const Hypergraph& h, ConstMatrixView<T> estate, std::span<const std::size_t> bucket,
                              ConstMatrixView<T> offsets, ConstMatrixView<T> vprev, MatrixView<T> vstate) {
  for (Index v = 0; v < h.num_vertices(); ++v) {
    auto inc = h.incident(v);
    for (std::size_t k = 0; k < vstate.cols; ++k) {
      if (inc.empty()) {
        vstate(v, k) = vprev(v, k);
        continue;
      }
      T acc = 0;
      for (Index e : inc) acc += estate(e, k) + offsets(bucket[e], k);
      vstate(v, k) = acc / T(inc.size());
    }
  }
}

}  // namespace reference

// ---------------------------------------------------------------------------
// OpenMP implementations.
// ---------------------------------------------------------------------------

template <class T>
void linear(ConstMatrixView<T> x, ConstMatrixView<T> w, std::span<const T> bias, MatrixView<T> y) {
  assert(x.cols == w.cols && y.rows == x.rows && y.cols == w.rows);
  const std::size_t in = x.cols, out = w.rows;
  const std::ptrdiff_t blocks = static_cast<std::ptrdiff_t>((x.rows + 3) / 4);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < blocks; ++b) {
    const std::size_t r0 = static_cast<std::size_t>(b) * 4;
    const std::size_t nr = std::min<std::size_t>(4, x.rows - r0);
    const T* x0 = x.data + r0 * in;
    const T* x1 = nr > 1 ? x0 + in : x0;
    const T* x2 = nr > 2 ? x0 + 2 * in : x0;
    const T* x3 = nr > 3 ? x0 + 3 * in : x0;
    for (std::size_t o = 0; o < out; ++o) {
      const T* wr = w.data + o * in;
      T a0 = 0, a1 = 0, a2 = 0, a3 = 0;
#pragma omp simd reduction(+ : a0, a1, a2, a3)
      for (std::size_t k = 0; k < in; ++k) {
        a0 += x0[k] * wr[k];
        a1 += x1[k] * wr[k];
        a2 += x2[k] * wr[k];
        a3 += x3[k] * wr[k];
      }
      const T bo = bias.empty() ? T(0) : bias[o];
      y(r0, o) = a0 + bo;
      if (nr > 1) y(r0 + 1, o) = a1 + bo;
      if (nr > 2) y(r0 + 2, o) = a2 + bo;
      if (nr > 3) y(r0 + 3, o) = a3 + bo;
    }
  }
}

template <class T>
void linear_backward(ConstMatrixView<T> x, ConstMatrixView<T> w, ConstMatrixView<T> dy, MatrixView<T> dx,
                     MatrixView<T> dw, std::span<T> db) {
  const std::size_t in = w.cols, out = w.rows, rows = dy.rows;
  if (!dx.empty()) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
      T* dxr = dx.data + static_cast<std::size_t>(r) * in;
      const T* dyr = dy.data + static_cast<std::size_t>(r) * out;
      for (std::size_t o = 0; o < out; ++o) {
        const T g = dyr[o];
        if (g == T(0)) continue;
        const T* wr = w.data + o * in;
#pragma omp simd
        for (std::size_t k = 0; k < in; ++k) dxr[k] += g * wr[k];
      }
    }
  }
  if (!dw.empty() || !db.empty()) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t o = 0; o < static_cast<std::ptrdiff_t>(out); ++o) {
      const std::size_t oo = static_cast<std::size_t>(o);
      T* dwr = dw.empty() ? nullptr : dw.data + oo * in;
      T bsum = 0;
      for (std::size_t r = 0; r < rows; ++r) {
        const T g = dy(r, oo);
        bsum += g;
        if (dwr == nullptr || g == T(0)) continue;
        const T* xr = x.data + r * in;
#pragma omp simd
        for (std::size_t k = 0; k < in; ++k) dwr[k] += g * xr[k];
      }
      if (!db.empty()) db[oo] += bsum;
    }
  }
}

template <class T>
void layer_norm(ConstMatrixView<T> x, std::span<const T> gamma, std::span<const T> beta, MatrixView<T> y,
                MatrixView<T> xhat, std::span<T> rstd) {
  const std::size_t n = x.cols;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t rr = 0; rr < static_cast<std::ptrdiff_t>(x.rows); ++rr) {
    const std::size_t r = static_cast<std::size_t>(rr);
    const T* xr = x.data + r * n;
    T mean = 0;
    for (std::size_t k = 0; k < n; ++k) mean += xr[k];
    mean /= T(n);
    T var = 0;
    for (std::size_t k = 0; k < n; ++k) var += (xr[k] - mean) * (xr[k] - mean);
    var /= T(n);
    const T rs = T(1) / std::sqrt(var + T(kLnEps));
    rstd[r] = rs;
    T* xh = xhat.data + r * n;
    T* yr = y.data + r * n;
#pragma omp simd
    for (std::size_t k = 0; k < n; ++k) {
      xh[k] = (xr[k] - mean) * rs;
      yr[k] = gamma[k] * xh[k] + beta[k];
    }
  }
}

template <class T>
void layer_norm_backward(ConstMatrixView<T> dy, ConstMatrixView<T> xhat, std::span<const T> rstd,
                         std::span<const T> gamma, MatrixView<T> dx, std::span<T> dgamma, std::span<T> dbeta) {
  const std::size_t n = dy.cols;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t rr = 0; rr < static_cast<std::ptrdiff_t>(dy.rows); ++rr) {
    const std::size_t r = static_cast<std::size_t>(rr);
    T mean_g = 0, mean_gx = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const T g = dy(r, k) * gamma[k];
      mean_g += g;
      mean_gx += g * xhat(r, k);
    }
    mean_g /= T(n);
    mean_gx /= T(n);
    for (std::size_t k = 0; k < n; ++k) {
      const T g = dy(r, k) * gamma[k];
      dx(r, k) += rstd[r] * (g - mean_g - xhat(r, k) * mean_gx);
    }
  }
  // Parameter gradients reduce over rows; split by column to stay race-free.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t kk = 0; kk < static_cast<std::ptrdiff_t>(n); ++kk) {
    const std::size_t k = static_cast<std::size_t>(kk);
    T g = 0, b = 0;
    for (std::size_t r = 0; r < dy.rows; ++r) {
      g += dy(r, k) * xhat(r, k);
      b += dy(r, k);
    }
    dgamma[k] += g;
    dbeta[k] += b;
  }
}

template <class T>
void causal_attention(ConstMatrixView<T> qkv, std::size_t heads, MatrixView<T> out, MatrixView<T> probs) {
  const std::size_t len = qkv.rows, d = qkv.cols / 3, hd = d / heads;
  const T scale = T(1) / std::sqrt(T(hd));
  const std::ptrdiff_t work = static_cast<std::ptrdiff_t>(heads * len);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t w = 0; w < work; ++w) {
    const std::size_t h = static_cast<std::size_t>(w) / len, t = static_cast<std::size_t>(w) % len;
    const T* q = qkv.data + t * qkv.cols + h * hd;
    T* p = probs.data + (h * len + t) * len;
    T mx = -INFINITY;
    for (std::size_t s = 0; s <= t; ++s) {
      const T* k = qkv.data + s * qkv.cols + d + h * hd;
      T acc = 0;
#pragma omp simd reduction(+ : acc)
      for (std::size_t j = 0; j < hd; ++j) acc += q[j] * k[j];
      p[s] = acc * scale;
      mx = std::max(mx, p[s]);
    }
    T z = 0;
    for (std::size_t s = 0; s <= t; ++s) {
      p[s] = std::exp(p[s] - mx);
      z += p[s];
    }
    const T inv = T(1) / z;
    T* o = out.data + t * out.cols + h * hd;
    for (std::size_t j = 0; j < hd; ++j) o[j] = 0;
    for (std::size_t s = 0; s <= t; ++s) {
      p[s] *= inv;
      const T* v = qkv.data + s * qkv.cols + 2 * d + h * hd;
      const T ps = p[s];
#pragma omp simd
      for (std::size_t j = 0; j < hd; ++j) o[j] += ps * v[j];
    }
  }
}

template <class T>
void causal_attention_backward(ConstMatrixView<T> qkv, std::size_t heads, ConstMatrixView<T> probs,
                               ConstMatrixView<T> dout, MatrixView<T> dqkv) {
  const std::size_t len = qkv.rows, d = qkv.cols / 3, hd = d / heads;
  const T scale = T(1) / std::sqrt(T(hd));
  // Heads own disjoint column ranges of dqkv.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t hh = 0; hh < static_cast<std::ptrdiff_t>(heads); ++hh) {
    const std::size_t h = static_cast<std::size_t>(hh);
    std::vector<T> dp(len);
    for (std::size_t t = 0; t < len; ++t) {
      const T* p = probs.data + (h * len + t) * len;
      const T* go = dout.data + t * dout.cols + h * hd;
      T dot = 0;
      for (std::size_t s = 0; s <= t; ++s) {
        const T* v = qkv.data + s * qkv.cols + 2 * d + h * hd;
        T* dv = dqkv.data + s * dqkv.cols + 2 * d + h * hd;
        const T ps = p[s];
        T acc = 0;
#pragma omp simd reduction(+ : acc)
        for (std::size_t j = 0; j < hd; ++j) {
          acc += go[j] * v[j];
          dv[j] += ps * go[j];
        }
        dp[s] = acc;
        dot += ps * acc;
      }
      const T* q = qkv.data + t * qkv.cols + h * hd;
      T* dq = dqkv.data + t * dqkv.cols + h * hd;
      for (std::size_t s = 0; s <= t; ++s) {
        const T ds = p[s] * (dp[s] - dot) * scale;
        const T* k = qkv.data + s * qkv.cols + d + h * hd;
        T* dk = dqkv.data + s * dqkv.cols + d + h * hd;
#pragma omp simd
        for (std::size_t j = 0; j < hd; ++j) {
          dq[j] += ds * k[j];
          dk[j] += ds * q[j];
        }
      }
    }
  }
}

template <class T>
void hyperedge_mean(const Hypergraph& h, ConstMatrixView<T> vstate, MatrixView<T> estate) {
  const std::size_t d = estate.cols;
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t ee = 0; ee < static_cast<std::ptrdiff_t>(h.num_hyperedges()); ++ee) {
    const Index e = static_cast<Index>(ee);
    auto m = h.members(e);
    T* out = estate.data + e * d;
    for (std::size_t k = 0; k < d; ++k) out[k] = 0;
    for (Index v : m) {
      const T* src = vstate.data + v * d;
#pragma omp simd
      for (std::size_t k = 0; k < d; ++k) out[k] += src[k];
    }
    const T inv = T(1) / T(m.size());
    for (std::size_t k = 0; k < d; ++k) out[k] *= inv;
  }
}

template <class T>
void vertex_mean_with_offsets(const Hypergraph& h, ConstMatrixView<T> estate, std::span<const std::size_t> bucket,
                              ConstMatrixView<T> offsets, ConstMatrixView<T> vprev, MatrixView<T> vstate) {
  const std::size_t d = vstate.cols;
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t vv = 0; vv < static_cast<std::ptrdiff_t>(h.num_vertices()); ++vv) {
    const Index v = static_cast<Index>(vv);
    auto inc = h.incident(v);
    T* out = vstate.data + v * d;
    if (inc.empty()) {
      for (std::size_t k = 0; k < d; ++k) out[k] = vprev(v, k);
      continue;
    }
    for (std::size_t k = 0; k < d; ++k) out[k] = 0;
    for (Index e : inc) {
      const T* src = estate.data + e * d;
      const T* off = offsets.data + bucket[e] * d;
#pragma omp simd
      for (std::size_t k = 0; k < d; ++k) out[k] += src[k] + off[k];
    }
    const T inv = T(1) / T(inc.size());
    for (std::size_t k = 0; k < d; ++k) out[k] *= inv;
  }
}

}  // namespace hgtok::kernels
