#include "gratis/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <string>
#include <vector>

#include <omp.h>

namespace gratis::kernels {
namespace {

inline double a_at(const GemmArgs& g, std::size_t i, std::size_t p) {
  return g.trans_a == Trans::No ? g.a[i * g.k + p] : g.a[p * g.m + i];
}

inline double b_at(const GemmArgs& g, std::size_t p, std::size_t j) {
  return g.trans_b == Trans::No ? g.b[p * g.n + j] : g.b[j * g.k + p];
}

// One output row; the per-element accumulation order is p = 0..k-1.
void gemm_row(const GemmArgs& g, std::size_t i) {
  double* crow = g.c + i * g.n;
  if (!g.accumulate) std::fill(crow, crow + g.n, 0.0);
  for (std::size_t p = 0; p < g.k; ++p) {
    const double aip = a_at(g, i, p);
    if (g.trans_b == Trans::No) {
      const double* brow = g.b + p * g.n;
      for (std::size_t j = 0; j < g.n; ++j) crow[j] += aip * brow[j];
    } else {
      for (std::size_t j = 0; j < g.n; ++j) crow[j] += aip * g.b[j * g.k + p];
    }
  }
}

void attention_one(const PairAttentionArgs& a, std::size_t e) {
  const auto [qi, ki] = a.pairs[e];
  const double* q = a.q + qi * a.tq * a.d;
  const double* k = a.k + ki * a.tk * a.d;
  const double* v = a.v + ki * a.tk * a.d;
  double* probs = a.probs + e * a.tq * a.tk;
  for (std::size_t t = 0; t < a.tq; ++t) {
    double* row = probs + t * a.tk;
    double mx = -INFINITY;
    for (std::size_t u = 0; u < a.tk; ++u) {
      double s = 0.0;
      for (std::size_t c = 0; c < a.d; ++c) s += q[t * a.d + c] * k[u * a.d + c];
      row[u] = s * a.scale;
      mx = std::max(mx, row[u]);
    }
    double z = 0.0;
    for (std::size_t u = 0; u < a.tk; ++u) {
      row[u] = std::exp(row[u] - mx);
      z += row[u];
    }
    for (std::size_t u = 0; u < a.tk; ++u) row[u] /= z;
  }
  double* out = a.out + e * a.d;
  std::fill(out, out + a.d, 0.0);
  for (std::size_t u = 0; u < a.tk; ++u) {
    double abar = 0.0;
    for (std::size_t t = 0; t < a.tq; ++t) abar += probs[t * a.tk + u];
    abar /= static_cast<double>(a.tq);
    for (std::size_t c = 0; c < a.d; ++c) out[c] += abar * v[u * a.d + c];
  }
}

// Per-pair gradient contributions written to dq/dk/dv scratch (tq×d, tk×d, tk×d).
void attention_grad_one(const PairAttentionGradArgs& a, std::size_t e, double* dq, double* dk,
                        double* dv, std::vector<double>& g, std::vector<double>& ds) {
  const auto [qi, ki] = a.pairs[e];
  const double* q = a.q + qi * a.tq * a.d;
  const double* k = a.k + ki * a.tk * a.d;
  const double* v = a.v + ki * a.tk * a.d;
  const double* probs = a.probs + e * a.tq * a.tk;
  const double* dout = a.grad_out + e * a.d;
  const double inv_tq = 1.0 / static_cast<double>(a.tq);

  g.assign(a.tk, 0.0);
  for (std::size_t u = 0; u < a.tk; ++u) {
    double s = 0.0;
    for (std::size_t c = 0; c < a.d; ++c) s += dout[c] * v[u * a.d + c];
    g[u] = s * inv_tq;
  }
  std::fill(dv, dv + a.tk * a.d, 0.0);
  for (std::size_t u = 0; u < a.tk; ++u) {
    double abar = 0.0;
    for (std::size_t t = 0; t < a.tq; ++t) abar += probs[t * a.tk + u];
    abar *= inv_tq;
    for (std::size_t c = 0; c < a.d; ++c) dv[u * a.d + c] = abar * dout[c];
  }
  ds.assign(a.tq * a.tk, 0.0);
  for (std::size_t t = 0; t < a.tq; ++t) {
    const double* row = probs + t * a.tk;
    double dot = 0.0;
    for (std::size_t u = 0; u < a.tk; ++u) dot += row[u] * g[u];
    for (std::size_t u = 0; u < a.tk; ++u) ds[t * a.tk + u] = row[u] * (g[u] - dot) * a.scale;
  }
  std::fill(dq, dq + a.tq * a.d, 0.0);
  std::fill(dk, dk + a.tk * a.d, 0.0);
  for (std::size_t t = 0; t < a.tq; ++t) {
    for (std::size_t u = 0; u < a.tk; ++u) {
      const double w = ds[t * a.tk + u];
      for (std::size_t c = 0; c < a.d; ++c) {
        dq[t * a.d + c] += w * k[u * a.d + c];
        dk[u * a.d + c] += w * q[t * a.d + c];
      }
    }
  }
}

void add_into(double* dst, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
}

void reduce_pair_grads(const PairAttentionGradArgs& a, const std::vector<double>& dq,
                       const std::vector<double>& dk, const std::vector<double>& dv) {
  const std::size_t nq = a.tq * a.d, nk = a.tk * a.d;
  for (std::size_t e = 0; e < a.pairs.size(); ++e) {
    const auto [qi, ki] = a.pairs[e];
    if (a.grad_q) add_into(a.grad_q + qi * nq, dq.data() + e * nq, nq);
    if (a.grad_k) add_into(a.grad_k + ki * nk, dk.data() + e * nk, nk);
    if (a.grad_v) add_into(a.grad_v + ki * nk, dv.data() + e * nk, nk);
  }
}

}  // namespace

namespace serial {

void gemm(const GemmArgs& g) {
  for (std::size_t i = 0; i < g.m; ++i) {
    for (std::size_t j = 0; j < g.n; ++j) {
      double acc = g.accumulate ? g.c[i * g.n + j] : 0.0;
      for (std::size_t p = 0; p < g.k; ++p) acc += a_at(g, i, p) * b_at(g, p, j);
      g.c[i * g.n + j] = acc;
    }
  }
}

void pair_attention(const PairAttentionArgs& a) {
  for (std::size_t e = 0; e < a.pairs.size(); ++e) attention_one(a, e);
}

void pair_attention_grad(const PairAttentionGradArgs& a) {
  const std::size_t np = a.pairs.size();
  std::vector<double> dq(np * a.tq * a.d), dk(np * a.tk * a.d), dv(np * a.tk * a.d);
  std::vector<double> g, ds;
  for (std::size_t e = 0; e < np; ++e) {
    attention_grad_one(a, e, dq.data() + e * a.tq * a.d, dk.data() + e * a.tk * a.d,
                       dv.data() + e * a.tk * a.d, g, ds);
  }
  reduce_pair_grads(a, dq, dk, dv);
}

}  // namespace serial

namespace parallel {

void gemm(const GemmArgs& g) {
  const auto m = static_cast<std::ptrdiff_t>(g.m);
  // Small products are not worth a fork.
  if (g.m * g.n * g.k < 32768) {
    for (std::ptrdiff_t i = 0; i < m; ++i) gemm_row(g, static_cast<std::size_t>(i));
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < m; ++i) gemm_row(g, static_cast<std::size_t>(i));
}

void pair_attention(const PairAttentionArgs& a) {
  const auto np = static_cast<std::ptrdiff_t>(a.pairs.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t e = 0; e < np; ++e) attention_one(a, static_cast<std::size_t>(e));
}

void pair_attention_grad(const PairAttentionGradArgs& a) {
  const std::size_t np = a.pairs.size();
  std::vector<double> dq(np * a.tq * a.d), dk(np * a.tk * a.d), dv(np * a.tk * a.d);
#pragma omp parallel
  {
    std::vector<double> g, ds;
#pragma omp for schedule(dynamic, 4)
    for (std::ptrdiff_t e = 0; e < static_cast<std::ptrdiff_t>(np); ++e) {
      const auto ue = static_cast<std::size_t>(e);
      attention_grad_one(a, ue, dq.data() + ue * a.tq * a.d, dk.data() + ue * a.tk * a.d,
                         dv.data() + ue * a.tk * a.d, g, ds);
    }
  }
  // Fixed pair order keeps the reduction deterministic.
  reduce_pair_grads(a, dq, dk, dv);
}

}  // namespace parallel

void configure_threads_from_env() {
  static std::once_flag once;
  std::call_once(once, [] {
    if (const char* env = std::getenv("GRATIS_THREADS")) {
      try {
        const int n = std::stoi(env);
        if (n > 0) omp_set_num_threads(n);
      } catch (const std::exception&) {
        // ignored: malformed cap leaves the OpenMP default in place
      }
    }
  });
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace gratis::kernels
