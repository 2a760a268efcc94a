#include "gratis/ttp.hpp"

#include <fmt/format.h>

#include "gratis/error.hpp"
#include "gratis/graph_definition.hpp"

namespace gratis::ttp {

TtpGraphParams make_graph_params(ParameterStore& store, const std::string& prefix, std::size_t d_ctx,
                                 double theta, Rng& rng) {
  if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError(fmt::format("theta = {} outside [0, 1]", theta));
  return {.h = store.add(prefix + ".h", glorot(d_ctx, 1, rng)), .theta = theta};
}

Tensor project_context(const Tensor& x_cube, const Tensor& h) {
  if (x_cube.rank() != 3 || x_cube.dim(0) != x_cube.dim(1)) {
    throw DimensionError("project_context: expected an [N×N×D] context, got " + shape_str(x_cube.shape()));
  }
  const std::size_t n = x_cube.dim(0), d = x_cube.dim(2);
  if (h.shape() != Shape{d, 1}) {
    throw DimensionError(fmt::format("project_context: h must be [{}x1], got {}", d, shape_str(h.shape())));
  }
  return reshape(matmul(reshape(x_cube, {n * n, d}), h), {n, n});
}

Tensor adjacency_prob_from_scores(const Tensor& xh) {
  if (xh.rank() != 2 || xh.dim(0) != xh.dim(1)) throw DimensionError("adjacency_prob: scores must be square");
  return mul(softmax(xh, 1), softmax(xh, 0));
}

Tensor adjacency_prob(const Tensor& x_cube, const TtpGraphParams& params) {
  return adjacency_prob_from_scores(project_context(x_cube, params.h));
}

Tensor threshold_union(const Tensor& prob, const Tensor& a_basic, double theta) {
  if (prob.shape() != a_basic.shape() || prob.rank() != 2) {
    throw DimensionError(fmt::format("threshold_union: {} vs {}", shape_str(prob.shape()),
                                     shape_str(a_basic.shape())));
  }
  const std::size_t n = prob.dim(0);
  auto p = prob.data(), a = a_basic.data();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && (p[i * n + j] >= theta || a[i * n + j] == 1.0)) out[i * n + j] = 1.0;
    }
  }
  return Tensor::from({n, n}, std::move(out));
}

Tensor knn_vertex_adjacency(const Tensor& v_hat, std::size_t c) {
  return gd::knn_adjacency(v_hat.detach(), c, gd::Metric::L2);
}

Tensor union_adjacency(const Tensor& a_v, const Tensor& a_basic) {
  if (a_v.shape() != a_basic.shape() || a_v.rank() != 2) throw DimensionError("union_adjacency: shape mismatch");
  const std::size_t n = a_v.dim(0);
  auto x = a_v.data(), y = a_basic.data();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && (x[i * n + j] == 1.0 || y[i * n + j] == 1.0)) out[i * n + j] = 1.0;
    }
  }
  return Tensor::from({n, n}, std::move(out));
}

}  // namespace gratis::ttp
