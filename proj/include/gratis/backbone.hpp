#pragma once

#include <span>
#include <string>
#include <vector>

#include "gratis/graph.hpp"
#include "gratis/params.hpp"

namespace gratis::backbone {

/// GCN encoder followed by the two-projection context builder.
struct GcnCnnParams {
  std::vector<Tensor> gcn_weights;  // [K×K] per layer
  Tensor w1;                        // [K × D²]
  Tensor w2;                        // [K × D]
  std::size_t d_ctx = 0;
};

GcnCnnParams make_gcn_cnn(ParameterStore& store, const std::string& prefix, std::size_t k,
                          std::size_t d_ctx, std::size_t gcn_layers, Rng& rng);

enum class ContextKind { Cube, Flat };

/// Global context of one sample: [N×N×D] for graph input, [N×F] for vector sets.
struct GlobalContext {
  ContextKind kind = ContextKind::Flat;
  Tensor cube;
  Tensor flat;

  std::size_t n_vertices() const;
  /// Channel count of a single context token (D or F).
  std::size_t token_dim() const;
  const Tensor& tensor() const { return kind == ContextKind::Cube ? cube : flat; }
};

/// Deg^{-1/2} (A + I) Deg^{-1/2}; constant (no gradient).
Tensor normalized_adjacency(const Tensor& adjacency);

/// H ← ReLU(Â·H·W) per layer, the last layer linear.
Tensor gcn_encode(const Tensor& vertices, const Tensor& adjacency, std::span<const Tensor> weights);
Tensor gcn_encode(const GraphSample& g, const GcnCnnParams& params);

/// X[i,j,d] = (reshape(xg·W1, N·D × D) · (xg·W2)ᵀ)[i·D + d, j].
Tensor global_context_cube(const Tensor& xg, const GcnCnnParams& params);

/// Row-stacks N vectors of a common dimension F into a Flat context.
GlobalContext vector_set_context(std::span<const std::vector<double>> vectors);
GlobalContext vector_set_context(const Tensor& rows);

}  // namespace gratis::backbone
