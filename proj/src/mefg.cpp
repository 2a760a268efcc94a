#include "gratis/mefg.hpp"

#include <cmath>
#include <memory>

#include <fmt/format.h>

#include "gratis/error.hpp"
#include "gratis/kernels.hpp"

namespace gratis::mefg {

using detail::TensorImpl;

MefgParams make_params(ParameterStore& store, const std::string& prefix, std::size_t vertex_dim,
                       std::size_t token_dim, std::size_t d_model, Rng& rng) {
  MefgParams p;
  p.vcr_wq = store.add(prefix + ".vcr_wq", glorot(vertex_dim, d_model, rng));
  p.vcr_wk = store.add(prefix + ".vcr_wk", glorot(token_dim, d_model, rng));
  p.vcr_wv = store.add(prefix + ".vcr_wv", glorot(token_dim, d_model, rng));
  p.vvr_wq = store.add(prefix + ".vvr_wq", glorot(d_model, d_model, rng));
  p.vvr_wk = store.add(prefix + ".vvr_wk", glorot(d_model, d_model, rng));
  p.vvr_wv = store.add(prefix + ".vvr_wv", glorot(d_model, d_model, rng));
  p.out_map = store.add(prefix + ".out_map", glorot(d_model, vertex_dim, rng));
  return p;
}

TokenSeq context_tokens_for_vertex(const backbone::GlobalContext& x, std::size_t i) {
  const std::size_t n = x.n_vertices();
  if (i >= n) throw ContractError(fmt::format("vertex {} out of range for {} vertices", i, n));
  if (x.kind == backbone::ContextKind::Flat) return {x.flat, i};
  const std::size_t d = x.token_dim();
  const std::size_t idx[] = {i};
  return {reshape(gather_rows(reshape(x.cube, {n, n * d}), idx), {n, d}), i};
}

namespace {

void check_query(const Tensor& q, const MefgParams& p) {
  if (q.rank() != 2 || q.dim(0) != 1 || q.dim(1) != p.vcr_wq.dim(0)) {
    throw DimensionError(fmt::format("vcr: query {} does not match W_q {}", shape_str(q.shape()),
                                     shape_str(p.vcr_wq.shape())));
  }
}

void check_tokens(const char* op, const Tensor& t, const Tensor& w) {
  if (t.rank() != 2 || t.dim(1) != w.dim(0)) {
    throw DimensionError(fmt::format("{}: tokens {} do not match projection {}", op,
                                     shape_str(t.shape()), shape_str(w.shape())));
  }
}

double inv_sqrt(std::size_t d) { return 1.0 / std::sqrt(static_cast<double>(d)); }

}  // namespace

Tensor vcr_attention(const Tensor& query_vertex, const TokenSeq& ctx, const MefgParams& params) {
  check_query(query_vertex, params);
  check_tokens("vcr", ctx.tokens, params.vcr_wk);
  const Tensor q = matmul(query_vertex, params.vcr_wq);
  const Tensor k = matmul(ctx.tokens, params.vcr_wk);
  // d_k is the channel count of the key/value input.
  return softmax(scale(matmul(q, transpose(k)), inv_sqrt(ctx.tokens.dim(1))), 1);
}

TokenSeq vcr(const Tensor& query_vertex, const TokenSeq& ctx, const MefgParams& params) {
  const Tensor alpha = vcr_attention(query_vertex, ctx, params);
  const Tensor v = matmul(ctx.tokens, params.vcr_wv);
  return {scale_rows(v, alpha), ctx.owner};
}

Tensor vcr_summed(const Tensor& query_vertex, const TokenSeq& ctx, const MefgParams& params) {
  const Tensor alpha = vcr_attention(query_vertex, ctx, params);
  return matmul(alpha, matmul(ctx.tokens, params.vcr_wv));
}

Tensor vvr_attention(const TokenSeq& f_i, const TokenSeq& f_j, const MefgParams& params) {
  check_tokens("vvr", f_i.tokens, params.vvr_wq);
  check_tokens("vvr", f_j.tokens, params.vvr_wk);
  const Tensor q = matmul(f_i.tokens, params.vvr_wq);
  const Tensor k = matmul(f_j.tokens, params.vvr_wk);
  return softmax(scale(matmul(q, transpose(k)), inv_sqrt(f_j.tokens.dim(1))), 1);
}

TokenSeq vvr(const TokenSeq& f_i, const TokenSeq& f_j, const MefgParams& params) {
  const Tensor a = vvr_attention(f_i, f_j, params);
  return {matmul(a, matmul(f_j.tokens, params.vvr_wv)), f_i.owner};
}

Tensor flatten_l(const TokenSeq& f, const MefgParams& params) {
  check_tokens("flatten_l", f.tokens, params.out_map);
  const Tensor pooled = mean(f.tokens, 0);
  return matmul(reshape(pooled, {1, pooled.numel()}), params.out_map);
}

Tensor pair_attention_pooled(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t tq,
                             std::size_t tk, std::span<const std::pair<std::size_t, std::size_t>> pairs,
                             double scale_factor, bool use_parallel) {
  if (q.rank() != 2 || k.rank() != 2 || v.shape() != k.shape() || q.dim(1) != k.dim(1)) {
    throw DimensionError(fmt::format("pair_attention_pooled: q {} k {} v {}", shape_str(q.shape()),
                                     shape_str(k.shape()), shape_str(v.shape())));
  }
  if (pairs.empty()) throw ContractError("pair_attention_pooled: no pairs");
  if (q.dim(0) % tq != 0 || k.dim(0) % tk != 0) {
    throw DimensionError("pair_attention_pooled: token counts do not divide the row counts");
  }
  const std::size_t d = q.dim(1), nq = q.dim(0) / tq, nk = k.dim(0) / tk;
  for (const auto& [a, b] : pairs) {
    if (a >= nq || b >= nk) throw DimensionError("pair_attention_pooled: pair index out of range");
  }
  auto pair_copy = std::make_shared<std::vector<std::pair<std::size_t, std::size_t>>>(pairs.begin(), pairs.end());
  auto probs = std::make_shared<std::vector<double>>(pairs.size() * tq * tk);
  std::vector<double> out(pairs.size() * d);
  const kernels::PairAttentionArgs args{.tq = tq, .tk = tk, .d = d, .scale = scale_factor,
                                        .q = q.data().data(), .k = k.data().data(),
                                        .v = v.data().data(), .pairs = *pair_copy,
                                        .out = out.data(), .probs = probs->data()};
  if (use_parallel) kernels::parallel::pair_attention(args);
  else kernels::serial::pair_attention(args);

  return detail::make_result(
      {pairs.size(), d}, std::move(out), {q, k, v},
      [pair_copy, probs, tq, tk, d, scale_factor, use_parallel](TensorImpl& self) {
        auto& pq = *self.parents[0];
        auto& pk = *self.parents[1];
        auto& pv = *self.parents[2];
        const kernels::PairAttentionGradArgs g{
            .tq = tq, .tk = tk, .d = d, .scale = scale_factor, .q = pq.data.data(),
            .k = pk.data.data(), .v = pv.data.data(), .pairs = *pair_copy, .probs = probs->data(),
            .grad_out = self.grad.data(),
            .grad_q = pq.requires_grad ? pq.grad_buffer().data() : nullptr,
            .grad_k = pk.requires_grad ? pk.grad_buffer().data() : nullptr,
            .grad_v = pv.requires_grad ? pv.grad_buffer().data() : nullptr};
        if (use_parallel) kernels::parallel::pair_attention_grad(g);
        else kernels::serial::pair_attention_grad(g);
      });
}

Tensor edge_features(std::span<const EdgeKey> keys, const Tensor& vertices,
                     const backbone::GlobalContext& x, const MefgParams& params) {
  if (keys.empty()) throw ContractError("edge_features: no edges");
  const std::size_t n = x.n_vertices();
  if (vertices.rank() != 2 || vertices.dim(0) != n) {
    throw DimensionError(fmt::format("edge_features: {} vertices for a context of {}",
                                     vertices.rank() == 2 ? vertices.dim(0) : 0, n));
  }
  check_tokens("vcr", vertices, params.vcr_wq);
  const std::size_t td = x.token_dim();
  const std::size_t dm = params.d_model();
  const Tensor q = matmul(vertices, params.vcr_wq);  // [N×dm]

  // VCR for all vertices at once. Every vertex owns T = N context tokens.
  const std::size_t t = n;
  std::vector<std::size_t> owner(n * t), token(n * t);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t s = 0; s < t; ++s) {
      owner[i * t + s] = i;
      token[i * t + s] = s;
    }
  }
  Tensor weights;   // [N×T]
  Tensor values;    // [N·T × dm], row i·T+s is ctx_i[s]·W_v
  if (x.kind == backbone::ContextKind::Flat) {
    check_tokens("vcr", x.flat, params.vcr_wk);
    const Tensor kc = matmul(x.flat, params.vcr_wk);
    weights = softmax(scale(matmul(q, transpose(kc)), inv_sqrt(td)), 1);
    values = gather_rows(matmul(x.flat, params.vcr_wv), token);
  } else {
    const Tensor tokens = reshape(x.cube, {n * t, td});
    check_tokens("vcr", tokens, params.vcr_wk);
    const Tensor kc = matmul(tokens, params.vcr_wk);
    const Tensor scores = sum(mul(kc, gather_rows(q, owner)), 1);
    weights = softmax(scale(reshape(scores, {n, t}), inv_sqrt(td)), 1);
    values = matmul(tokens, params.vcr_wv);
  }
  const Tensor f = scale_rows(values, reshape(weights, {n * t}));  // un-summed VCR tokens

  const Tensor qv = matmul(f, params.vvr_wq);
  const Tensor kv = matmul(f, params.vvr_wk);
  const Tensor vv = matmul(f, params.vvr_wv);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(keys.size());
  for (const auto& key : keys) {
    if (key.i >= n || key.j >= n) throw ContractError("edge_features: edge endpoint out of range");
    pairs.emplace_back(key.i, key.j);
  }
  const Tensor pooled = pair_attention_pooled(qv, kv, vv, t, t, pairs, inv_sqrt(dm));
  return matmul(pooled, params.out_map);
}

EdgeFeatureStore generate_edge_features(const Tensor& adjacency, const Tensor& vertices,
                                        const backbone::GlobalContext& x, const MefgParams& params) {
  const std::size_t n = adjacency.dim(0);
  const std::size_t k = params.out_map.dim(1);
  EdgeFeatureStore store(k);
  std::vector<EdgeKey> keys;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && adjacency.at(i, j) == 1.0) keys.push_back({i, j});
    }
  }
  if (keys.empty()) return store;
  NoGradGuard no_grad;
  const Tensor feats = edge_features(keys, vertices, x, params);
  auto data = feats.data();
  for (std::size_t e = 0; e < keys.size(); ++e) {
    store.set(keys[e], {data.begin() + static_cast<std::ptrdiff_t>(e * k),
                        data.begin() + static_cast<std::ptrdiff_t>((e + 1) * k)});
  }
  return store;
}

}  // namespace gratis::mefg
