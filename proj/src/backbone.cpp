#include "gratis/backbone.hpp"

#include <cmath>

#include <fmt/format.h>

#include "gratis/error.hpp"

namespace gratis::backbone {

GcnCnnParams make_gcn_cnn(ParameterStore& store, const std::string& prefix, std::size_t k,
                          std::size_t d_ctx, std::size_t gcn_layers, Rng& rng) {
  if (d_ctx == 0) throw ContractError("context depth D must be positive");
  GcnCnnParams p;
  p.d_ctx = d_ctx;
  for (std::size_t l = 0; l < gcn_layers; ++l) {
    p.gcn_weights.push_back(store.add(fmt::format("{}.gcn{}", prefix, l), glorot(k, k, rng)));
  }
  p.w1 = store.add(prefix + ".w1", glorot(k, d_ctx * d_ctx, rng));
  p.w2 = store.add(prefix + ".w2", glorot(k, d_ctx, rng));
  return p;
}

std::size_t GlobalContext::n_vertices() const { return tensor().dim(0); }

std::size_t GlobalContext::token_dim() const {
  return kind == ContextKind::Cube ? cube.dim(2) : flat.dim(1);
}

Tensor normalized_adjacency(const Tensor& adjacency) {
  const std::size_t n = adjacency.dim(0);
  if (adjacency.shape() != Shape{n, n}) throw DimensionError("adjacency must be square");
  std::vector<double> deg(n, 1.0);  // self loop
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) deg[i] += adjacency.at(i, j);
    }
  }
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double a = i == j ? 1.0 : adjacency.at(i, j);
      out[i * n + j] = a / std::sqrt(deg[i] * deg[j]);
    }
  }
  return Tensor::from({n, n}, std::move(out));
}

Tensor gcn_encode(const Tensor& vertices, const Tensor& adjacency, std::span<const Tensor> weights) {
  if (vertices.rank() != 2 || adjacency.dim(0) != vertices.dim(0)) {
    throw DimensionError(fmt::format("gcn_encode: vertices {} vs adjacency {}",
                                     shape_str(vertices.shape()), shape_str(adjacency.shape())));
  }
  const Tensor a_hat = normalized_adjacency(adjacency);
  Tensor h = vertices;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = matmul(matmul(a_hat, h), weights[l]);
    if (l + 1 < weights.size()) h = relu(h);
  }
  return h;
}

Tensor gcn_encode(const GraphSample& g, const GcnCnnParams& params) {
  return gcn_encode(g.vertices, g.adjacency, params.gcn_weights);
}

Tensor global_context_cube(const Tensor& xg, const GcnCnnParams& params) {
  const std::size_t d = params.d_ctx;
  if (xg.rank() != 2 || xg.dim(1) != params.w1.dim(0) || xg.dim(1) != params.w2.dim(0)) {
    throw DimensionError(fmt::format("global_context_cube: features {} vs W1 {} / W2 {}",
                                     shape_str(xg.shape()), shape_str(params.w1.shape()),
                                     shape_str(params.w2.shape())));
  }
  if (params.w1.dim(1) != d * d || params.w2.dim(1) != d) {
    throw DimensionError("global_context_cube: W1 must have D² columns and W2 D columns");
  }
  const std::size_t n = xg.dim(0);
  const Tensor m1 = reshape(matmul(xg, params.w1), {n * d, d});  // row i·D+d
  const Tensor m2 = matmul(xg, params.w2);                        // [N×D]
  const Tensor p = matmul(m1, transpose(m2));                     // [(N·D)×N]
  return permute(reshape(p, {n, d, n}), {0, 2, 1});
}

GlobalContext vector_set_context(std::span<const std::vector<double>> vectors) {
  if (vectors.empty()) throw ContractError("vector_set_context: no vectors");
  const std::size_t f = vectors.front().size();
  std::vector<double> rows;
  for (const auto& v : vectors) {
    if (v.size() != f) throw ContractError("vector_set_context: ragged input vectors");
    rows.insert(rows.end(), v.begin(), v.end());
  }
  return vector_set_context(Tensor::from({vectors.size(), f}, std::move(rows)));
}

GlobalContext vector_set_context(const Tensor& rows) {
  if (rows.rank() != 2) throw DimensionError("vector_set_context: expected an [N×F] matrix");
  return {.kind = ContextKind::Flat, .cube = {}, .flat = rows};
}

}  // namespace gratis::backbone
