#pragma once

// Message-passing predictors over directed graphs with multi-dimensional edges.
//
// Edge (i, j) in the key list means Â[i, j] = 1, and vertex i receives from j.

#include <span>
#include <string>
#include <vector>

#include "gratis/graph.hpp"
#include "gratis/params.hpp"

namespace gratis::gnn {

/// Differentiable view of a graph sample. Edge rows follow the sorted keys.
struct GraphState {
  Tensor vertices;                // [N×K]
  std::vector<EdgeKey> edges;     // sorted
  Tensor edge_features;           // [E×edge_dim], undefined when E = 0
  Tensor edge_weights;            // [E] per-edge message weights, optional
  std::size_t edge_dim = 1;

  std::size_t n_vertices() const { return vertices.dim(0); }
  std::size_t vertex_dim() const { return vertices.dim(1); }
};

/// Constant view of a sample's vertices and stored edges.
GraphState state_from_sample(const GraphSample& g);
/// Values of a state written back as a sample with `labels`.
GraphSample sample_from_state(const GraphState& s, const TaskLabels& labels);

enum class LayerKind { Gated, Gat };
LayerKind parse_layer_kind(const std::string& name);

struct GatedLayerParams {
  Tensor u;      // [K×K]
  Tensor v_map;  // [K×K]
  Tensor e1;     // [edge_in×K]
  Tensor e2;     // [K×K]
  Tensor e3;     // [K×K]
};

struct GatLayerParams {
  Tensor w_vert;  // [K×K]
  Tensor w_edge;  // [edge_in×K]
  Tensor attn;    // [3K×1]
  double leaky_slope = 0.2;
};

GatedLayerParams make_gated(ParameterStore& store, const std::string& prefix, std::size_t k,
                            std::size_t edge_in, Rng& rng);
GatLayerParams make_gat(ParameterStore& store, const std::string& prefix, std::size_t k,
                        std::size_t edge_in, Rng& rng);

/// ê' = ê·E1 + v_i·E2 + v_j·E3, gate = sigmoid(ê') (times the edge weight),
/// m_i = Σ gate ⊙ v_j·Vmap / (Σ gate + 1e-6), v' = ReLU(v·U + m) [+ v].
GraphState gated_layer(const GraphState& g, const GatedLayerParams& p, bool residual);

/// Neighbour attention α_ij over the in-edges of each i, one entry per edge.
Tensor gat_attention(const GraphState& g, const GatLayerParams& p);
/// v' = ReLU(Σ_j α_ij v_j·W) [+ v]; zero in-degree falls back to v_i·W.
GraphState gat_layer(const GraphState& g, const GatLayerParams& p, bool residual);

struct Layer {
  LayerKind kind = LayerKind::Gated;
  GatedLayerParams gated;
  GatLayerParams gat;
};

/// Registers `count` layers named prefix.0, prefix.1, ...
std::vector<Layer> make_layers(ParameterStore& store, const std::string& prefix, LayerKind kind,
                               std::size_t count, std::size_t k, std::size_t edge_in, Rng& rng);
GraphState apply_layers(const GraphState& g, std::span<const Layer> layers, bool residual);

enum class LinkMode { Vertices, Edge, VerticesPlusEdge };
LinkMode parse_link_mode(const std::string& name);
std::string to_string(LinkMode mode);

struct HeadConfig {
  TaskKind task = TaskKind::VertexClass;
  LinkMode link_mode = LinkMode::VerticesPlusEdge;
  std::size_t hidden = 32;
  std::size_t classes = 2;
};

/// Three-layer MLP; edge_lift maps single-value edges to K when needed.
struct HeadParams {
  Tensor w1, b1, w2, b2, w3, b3;
  Tensor edge_lift;  // [1×K], only when edges are single-valued
};

HeadParams make_head(ParameterStore& store, const std::string& prefix, const HeadConfig& cfg,
                     std::size_t k, std::size_t edge_dim, Rng& rng);

Tensor mlp(const Tensor& x, const HeadParams& p);

struct Readout {
  Tensor logits;                       // [rows × classes]
  std::vector<EdgeKey> missing_edges;  // link queries answered with a zero edge row
};

/// Graph: one row. Vertex: N rows. Link: one row per query, in order.
Readout readout(const GraphState& g, std::span<const EdgeKey> link_queries, const HeadParams& p,
                const HeadConfig& cfg);

/// Four-way co-occurrence class of an ordered pair of binary states.
inline std::size_t cooccur_class(bool s_i, bool s_j) { return 2 * std::size_t(s_i) + std::size_t(s_j); }

}  // namespace gratis::gnn
