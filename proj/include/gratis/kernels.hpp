#pragma once

// Hot loops used by the tensor ops and the edge-feature generator.
//
// Each kernel has a `serial` reference and an OpenMP `parallel` version. The
// parallel versions split work only across independent outputs and keep the
// per-output summation order of the reference, so both produce bit-identical
// results for any thread count.

#include <cstddef>
#include <span>
#include <utility>

namespace gratis::kernels {

enum class Trans { No, Yes };

/// C[m×n] (+)= op(A)·op(B) with op(A) m×k and op(B) k×n, all row-major.
struct GemmArgs {
  Trans trans_a = Trans::No;
  Trans trans_b = Trans::No;
  std::size_t m = 0, n = 0, k = 0;
  const double* a = nullptr;
  const double* b = nullptr;
  double* c = nullptr;
  bool accumulate = false;
};

/// Batched pooled cross-attention over index pairs.
///
/// For pair p = (qi, ki): S = scale · Q[qi] · K[ki]ᵀ (tq×tk), A = row-softmax(S),
/// out[p] = (1/tq) Σ_t (A·V[ki])[t]. Q is [nq×tq×d], K and V are [nk×tk×d].
struct PairAttentionArgs {
  std::size_t tq = 0, tk = 0, d = 0;
  double scale = 1.0;
  const double* q = nullptr;
  const double* k = nullptr;
  const double* v = nullptr;
  std::span<const std::pair<std::size_t, std::size_t>> pairs;
  double* out = nullptr;    // [pairs×d]
  double* probs = nullptr;  // [pairs×tq×tk], attention weights kept for backward
};

struct PairAttentionGradArgs {
  std::size_t tq = 0, tk = 0, d = 0;
  double scale = 1.0;
  const double* q = nullptr;
  const double* k = nullptr;
  const double* v = nullptr;
  std::span<const std::pair<std::size_t, std::size_t>> pairs;
  const double* probs = nullptr;     // from the forward call
  const double* grad_out = nullptr;  // [pairs×d]
  double* grad_q = nullptr;          // accumulated, may be null
  double* grad_k = nullptr;
  double* grad_v = nullptr;
};

namespace serial {
void gemm(const GemmArgs& args);
void pair_attention(const PairAttentionArgs& args);
void pair_attention_grad(const PairAttentionGradArgs& args);
}  // namespace serial

namespace parallel {
void gemm(const GemmArgs& args);
void pair_attention(const PairAttentionArgs& args);
void pair_attention_grad(const PairAttentionGradArgs& args);
}  // namespace parallel

/// Applies GRATIS_THREADS (if set) as the OpenMP thread cap. Idempotent.
void configure_threads_from_env();
int max_threads();

}  // namespace gratis::kernels
