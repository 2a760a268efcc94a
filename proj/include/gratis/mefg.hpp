#pragma once

// Multi-dimensional edge feature generation.
//
// For an edge (i, j):  ê_ij = L(VVR(VCR(v_i, ctx_i), VCR(v_j, ctx_j))).
//
// VCR is single-query cross-attention from a vertex into its context tokens.
// Summing its output over tokens would collapse it to one vector and leave
// VVR attending over a single key, so VCR here returns the attention-weighted
// value *sequence*: token t is α_t · (ctx_t · W_v). The summed form is exactly
// the token sum of this sequence (see vcr_summed).
//
// VVR is standard cross-attention with queries from F_i and keys/values from
// F_j. L averages the VVR tokens and maps them linearly to K dimensions.

#include <span>
#include <string>
#include <vector>

#include "gratis/backbone.hpp"
#include "gratis/graph.hpp"
#include "gratis/params.hpp"

namespace gratis::mefg {

struct MefgParams {
  Tensor vcr_wq;   // [K × d_model]
  Tensor vcr_wk;   // [token_dim × d_model]
  Tensor vcr_wv;   // [token_dim × d_model]
  Tensor vvr_wq;   // [d_model × d_model]
  Tensor vvr_wk;   // [d_model × d_model]
  Tensor vvr_wv;   // [d_model × d_model]
  Tensor out_map;  // [d_model × K]

  std::size_t d_model() const { return vcr_wq.dim(1); }
};

MefgParams make_params(ParameterStore& store, const std::string& prefix, std::size_t vertex_dim,
                       std::size_t token_dim, std::size_t d_model, Rng& rng);

struct TokenSeq {
  Tensor tokens;  // [T × dim]
  std::size_t owner = 0;
};

/// Cube: the N tokens X[i,:,:]. Flat: every row of X.
TokenSeq context_tokens_for_vertex(const backbone::GlobalContext& x, std::size_t i);

/// VCR attention weights over the context tokens, [1×T].
Tensor vcr_attention(const Tensor& query_vertex, const TokenSeq& ctx, const MefgParams& params);
/// Un-summed VCR output, [T × d_model].
TokenSeq vcr(const Tensor& query_vertex, const TokenSeq& ctx, const MefgParams& params);
/// softmax(q·W_q (ctx·W_k)ᵀ / √d_k) · ctx·W_v, [1 × d_model].
Tensor vcr_summed(const Tensor& query_vertex, const TokenSeq& ctx, const MefgParams& params);

/// VVR attention weights, [T_i × T_j], rows sum to one.
Tensor vvr_attention(const TokenSeq& f_i, const TokenSeq& f_j, const MefgParams& params);
/// Cross-attention output with T_i tokens.
TokenSeq vvr(const TokenSeq& f_i, const TokenSeq& f_j, const MefgParams& params);

/// Token mean followed by out_map, [1×K].
Tensor flatten_l(const TokenSeq& f, const MefgParams& params);

/// Differentiable edge features for the given ordered pairs, [E×K], computed
/// with one batched attention pass. `keys` must be non-empty.
Tensor edge_features(std::span<const EdgeKey> keys, const Tensor& vertices,
                     const backbone::GlobalContext& x, const MefgParams& params);

/// Value-level store of ê_ij for every (i, j) with adjacency[i,j] = 1.
EdgeFeatureStore generate_edge_features(const Tensor& adjacency, const Tensor& vertices,
                                        const backbone::GlobalContext& x, const MefgParams& params);

/// Pooled pairwise attention as a differentiable op (serial or OpenMP kernel).
/// q: [nq·tq × d], k/v: [nk·tk × d]; returns [pairs × d].
Tensor pair_attention_pooled(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t tq,
                             std::size_t tk, std::span<const std::pair<std::size_t, std::size_t>> pairs,
                             double scale, bool use_parallel = true);

}  // namespace gratis::mefg
