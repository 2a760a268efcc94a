// Serial reference vs OpenMP kernels. Set GRATIS_THREADS to cap threads.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "gratis/kernels.hpp"

using namespace gratis::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

template <void (*Gemm)(const GemmArgs&)>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
  std::vector<double> c(n * n);
  const GemmArgs args{.m = n, .n = n, .k = n, .a = a.data(), .b = b.data(), .c = c.data()};
  for (auto _ : state) {
    Gemm(args);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

// Edge-feature shape: every ordered pair of n vertices, tq = tk = n tokens.
struct AttnFixture {
  std::size_t n, d;
  std::vector<double> q, k, v, out, probs, grad_out, gq, gk, gv;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  explicit AttnFixture(std::size_t n_, std::size_t d_) : n(n_), d(d_) {
    q = random_vec(n * n * d, 3);
    k = random_vec(n * n * d, 4);
    v = random_vec(n * n * d, 5);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) pairs.emplace_back(i, j);
    out.resize(pairs.size() * d);
    probs.resize(pairs.size() * n * n);
    grad_out = random_vec(pairs.size() * d, 6);
    gq.resize(q.size());
    gk.resize(k.size());
    gv.resize(v.size());
  }
  PairAttentionArgs fwd() {
    return {.tq = n, .tk = n, .d = d, .scale = 0.5, .q = q.data(), .k = k.data(), .v = v.data(),
            .pairs = pairs, .out = out.data(), .probs = probs.data()};
  }
  PairAttentionGradArgs bwd() {
    return {.tq = n, .tk = n, .d = d, .scale = 0.5, .q = q.data(), .k = k.data(), .v = v.data(),
            .pairs = pairs, .probs = probs.data(), .grad_out = grad_out.data(),
            .grad_q = gq.data(), .grad_k = gk.data(), .grad_v = gv.data()};
  }
};

template <void (*Attn)(const PairAttentionArgs&)>
void BM_PairAttention(benchmark::State& state) {
  AttnFixture f(static_cast<std::size_t>(state.range(0)), 16);
  const auto args = f.fwd();
  for (auto _ : state) {
    Attn(args);
    benchmark::DoNotOptimize(f.out.data());
  }
}

template <void (*Attn)(const PairAttentionArgs&), void (*Grad)(const PairAttentionGradArgs&)>
void BM_PairAttentionGrad(benchmark::State& state) {
  AttnFixture f(static_cast<std::size_t>(state.range(0)), 16);
  Attn(f.fwd());
  const auto args = f.bwd();
  for (auto _ : state) {
    Grad(args);
    benchmark::DoNotOptimize(f.gq.data());
  }
}

}  // namespace

BENCHMARK(BM_Gemm<serial::gemm>)->Name("gemm/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<parallel::gemm>)->Name("gemm/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_PairAttention<serial::pair_attention>)->Name("pair_attention/serial")->Arg(10)->Arg(20);
BENCHMARK(BM_PairAttention<parallel::pair_attention>)->Name("pair_attention/parallel")->Arg(10)->Arg(20);
BENCHMARK(BM_PairAttentionGrad<serial::pair_attention, serial::pair_attention_grad>)
    ->Name("pair_attention_grad/serial")
    ->Arg(10)
    ->Arg(20);
BENCHMARK(BM_PairAttentionGrad<parallel::pair_attention, parallel::pair_attention_grad>)
    ->Name("pair_attention_grad/parallel")
    ->Arg(10)
    ->Arg(20);

BENCHMARK_MAIN();
