#pragma once

#include <string>

#include "gratis/params.hpp"
#include "gratis/tensor.hpp"

namespace gratis::ttp {

/// Position-wise map h: D → 1 shared by every (i, j), plus the threshold θ.
struct TtpGraphParams {
  Tensor h;  // [D×1]
  double theta = 0.5;
};

TtpGraphParams make_graph_params(ParameterStore& store, const std::string& prefix, std::size_t d_ctx,
                                 double theta, Rng& rng);

/// Xʰ[i,j] = h(X[i,j,:]) from a [N×N×D] context.
Tensor project_context(const Tensor& x_cube, const Tensor& h);

/// Row-softmax(Xʰ) ⊙ column-softmax(Xʰ); entries in (0, 1]. Differentiable.
Tensor adjacency_prob(const Tensor& x_cube, const TtpGraphParams& params);
Tensor adjacency_prob_from_scores(const Tensor& xh);

/// Â[i,j] = 1 iff (p[i,j] ≥ θ or a_basic[i,j] = 1) and i ≠ j.
Tensor threshold_union(const Tensor& prob, const Tensor& a_basic, double theta);

/// Directed Euclidean C-nearest adjacency of the task-specific vertices.
Tensor knn_vertex_adjacency(const Tensor& v_hat, std::size_t c);

/// Elementwise OR of two binary matrices with the diagonal cleared.
Tensor union_adjacency(const Tensor& a_v, const Tensor& a_basic);

}  // namespace gratis::ttp
