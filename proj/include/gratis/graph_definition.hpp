#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gratis/backbone.hpp"
#include "gratis/graph.hpp"
#include "gratis/params.hpp"

namespace gratis::gd {

enum class RuleKind { Provided, FullyConnected, KnnL1, KnnL2, KnnMahalanobis };

/// Human-interpretable rule defining the basic adjacency of non-graph input.
struct AdjacencyRule {
  RuleKind kind = RuleKind::FullyConnected;
  std::optional<std::size_t> c;  // neighbours per vertex, Knn rules only

  bool is_knn() const {
    return kind == RuleKind::KnnL1 || kind == RuleKind::KnnL2 || kind == RuleKind::KnnMahalanobis;
  }
  /// Accepts provided | full | knn_l1 | knn_l2 | knn_mah.
  static AdjacencyRule parse(const std::string& name, std::optional<std::size_t> c);
  std::string name() const;
};

/// N vertex feature extractors, each a linear map token-dim → K followed by
/// average pooling over that vertex's tokens.
struct VfeParams {
  std::vector<Tensor> extractors;  // [token_dim × K] each
};

VfeParams make_vfe(ParameterStore& store, const std::string& prefix, std::size_t n_vertices,
                   std::size_t token_dim, std::size_t k, Rng& rng);

/// Pre-defined graphs pass through unchanged.
GraphSample define_basic_from_graph(const GraphSample& g_in);

/// Vertex i = mean over its tokens of token·FCᵢ. Flat: the token is row i.
/// Cube: the tokens are the N rows of X[i,:,:].
Tensor vfe_extract(const backbone::GlobalContext& x, const VfeParams& params);

/// Directed C-nearest-neighbour adjacency under the rule's metric; ties go to
/// the smaller index, diagonal is zero. FullyConnected gives ones minus I.
Tensor basic_adjacency(const Tensor& vertices, const AdjacencyRule& rule);

enum class Metric { L1, L2, Mahalanobis };

/// Shared C-nearest selection. Mahalanobis falls back to L2 (with a warning)
/// if the ridged covariance cannot be factorized.
Tensor knn_adjacency(const Tensor& vertices, std::size_t c, Metric metric);

}  // namespace gratis::gd
