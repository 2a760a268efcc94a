#include "gratis/gnn.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "gratis/error.hpp"
#include "gratis/log.hpp"

namespace gratis::gnn {

GraphState state_from_sample(const GraphSample& g) {
  GraphState s;
  s.vertices = g.vertices;
  s.edges = g.edges.keys();
  s.edge_dim = g.edges.edge_dim();
  if (!s.edges.empty()) {
    std::vector<double> rows;
    rows.reserve(s.edges.size() * s.edge_dim);
    for (const auto& key : s.edges) {
      const auto* f = g.edges.find(key);
      rows.insert(rows.end(), f->begin(), f->end());
    }
    s.edge_features = Tensor::from({s.edges.size(), s.edge_dim}, std::move(rows));
  }
  return s;
}

GraphSample sample_from_state(const GraphState& s, const TaskLabels& labels) {
  GraphSample g;
  g.n_vertices = s.n_vertices();
  g.vertex_dim = s.vertex_dim();
  g.vertices = s.vertices.detach();
  std::vector<double> adj(g.n_vertices * g.n_vertices, 0.0);
  g.edges = EdgeFeatureStore(s.edge_dim);
  for (std::size_t e = 0; e < s.edges.size(); ++e) {
    const auto& key = s.edges[e];
    adj[key.i * g.n_vertices + key.j] = 1.0;
    auto row = s.edge_features.data().subspan(e * s.edge_dim, s.edge_dim);
    g.edges.set(key, {row.begin(), row.end()});
  }
  g.adjacency = Tensor::from({g.n_vertices, g.n_vertices}, std::move(adj));
  g.labels = labels;
  return g;
}

LayerKind parse_layer_kind(const std::string& name) {
  if (name == "gated") return LayerKind::Gated;
  if (name == "gat") return LayerKind::Gat;
  throw ConfigError("gnn.kind must be gated or gat, got '" + name + "'");
}

GatedLayerParams make_gated(ParameterStore& store, const std::string& prefix, std::size_t k,
                            std::size_t edge_in, Rng& rng) {
  GatedLayerParams p;
  p.u = store.add(prefix + ".u", glorot(k, k, rng));
  p.v_map = store.add(prefix + ".v_map", glorot(k, k, rng));
  p.e1 = store.add(prefix + ".e1", glorot(edge_in, k, rng));
  p.e2 = store.add(prefix + ".e2", glorot(k, k, rng));
  p.e3 = store.add(prefix + ".e3", glorot(k, k, rng));
  return p;
}

GatLayerParams make_gat(ParameterStore& store, const std::string& prefix, std::size_t k,
                        std::size_t edge_in, Rng& rng) {
  GatLayerParams p;
  p.w_vert = store.add(prefix + ".w_vert", glorot(k, k, rng));
  p.w_edge = store.add(prefix + ".w_edge", glorot(edge_in, k, rng));
  p.attn = store.add(prefix + ".attn", glorot(3 * k, 1, rng));
  return p;
}

namespace {

struct Endpoints {
  std::vector<std::size_t> src;  // receiving vertex i
  std::vector<std::size_t> dst;  // sending vertex j
};

Endpoints endpoints(const GraphState& g) {
  Endpoints ep;
  const std::size_t n = g.n_vertices();
  ep.src.reserve(g.edges.size());
  ep.dst.reserve(g.edges.size());
  for (const auto& key : g.edges) {
    if (key.i >= n || key.j >= n || key.i == key.j) {
      throw ContractError(fmt::format("edge ({},{}) invalid for {} vertices", key.i, key.j, n));
    }
    ep.src.push_back(key.i);
    ep.dst.push_back(key.j);
  }
  return ep;
}

void check_state(const char* op, const GraphState& g, std::size_t k, std::size_t edge_in) {
  if (g.vertices.rank() != 2 || g.vertex_dim() != k) {
    throw DimensionError(fmt::format("{}: vertices {} but layer expects dimension {}", op,
                                     shape_str(g.vertices.shape()), k));
  }
  if (!g.edges.empty()) {
    if (!g.edge_features.defined() || g.edge_features.shape() != Shape{g.edges.size(), edge_in}) {
      throw DimensionError(fmt::format("{}: edge features {} for {} edges of dimension {}", op,
                                       g.edge_features.defined() ? shape_str(g.edge_features.shape())
                                                                 : "undefined",
                                       g.edges.size(), edge_in));
    }
    if (g.edge_weights.defined() && g.edge_weights.numel() != g.edges.size()) {
      throw DimensionError(fmt::format("{}: {} edge weights for {} edges", op,
                                       g.edge_weights.numel(), g.edges.size()));
    }
  }
}

Tensor finish_vertices(const Tensor& pre, const Tensor& v, bool residual) {
  Tensor out = relu(pre);
  return residual ? add(out, v) : out;
}

}  // namespace

GraphState gated_layer(const GraphState& g, const GatedLayerParams& p, bool residual) {
  const std::size_t k = p.u.dim(0);
  check_state("gated_layer", g, k, p.e1.dim(0));
  const std::size_t n = g.n_vertices();
  GraphState out;
  out.edges = g.edges;
  out.edge_weights = g.edge_weights;
  out.edge_dim = k;
  const Tensor self = matmul(g.vertices, p.u);
  if (g.edges.empty()) {
    out.vertices = finish_vertices(self, g.vertices, residual);
    return out;
  }
  const auto ep = endpoints(g);
  const Tensor e_new = add(add(matmul(g.edge_features, p.e1), gather_rows(matmul(g.vertices, p.e2), ep.src)),
                           gather_rows(matmul(g.vertices, p.e3), ep.dst));
  Tensor gate = sigmoid(e_new);
  if (g.edge_weights.defined()) gate = scale_rows(gate, g.edge_weights);
  const Tensor msg = mul(gate, gather_rows(matmul(g.vertices, p.v_map), ep.dst));
  const Tensor num = scatter_add_rows(msg, ep.src, n);
  const Tensor den = add_scalar(scatter_add_rows(gate, ep.src, n), 1e-6);
  out.vertices = finish_vertices(add(self, div(num, den)), g.vertices, residual);
  out.edge_features = e_new;
  return out;
}

Tensor gat_attention(const GraphState& g, const GatLayerParams& p) {
  const std::size_t k = p.w_vert.dim(1);
  check_state("gat_attention", g, p.w_vert.dim(0), p.w_edge.dim(0));
  if (p.attn.shape() != Shape{3 * k, 1}) throw DimensionError("gat: attn must be [3K×1]");
  if (g.edges.empty()) throw ContractError("gat_attention: no edges");
  const auto ep = endpoints(g);
  std::vector<std::size_t> r1(k), r2(k), r3(k);
  for (std::size_t c = 0; c < k; ++c) {
    r1[c] = c;
    r2[c] = k + c;
    r3[c] = 2 * k + c;
  }
  const Tensor z = matmul(g.vertices, p.w_vert);
  const Tensor ze = matmul(g.edge_features, p.w_edge);
  const Tensor s1 = matmul(z, gather_rows(p.attn, r1));  // [N×1]
  const Tensor s2 = matmul(z, gather_rows(p.attn, r2));
  const Tensor s3 = matmul(ze, gather_rows(p.attn, r3));  // [E×1]
  Tensor logit = leaky_relu(add(add(gather_rows(s1, ep.src), gather_rows(s2, ep.dst)), s3),
                            p.leaky_slope);
  if (g.edge_weights.defined()) logit = add(logit, reshape(log(g.edge_weights), {g.edges.size(), 1}));
  return segment_softmax(reshape(logit, {g.edges.size()}), ep.src, g.n_vertices());
}

GraphState gat_layer(const GraphState& g, const GatLayerParams& p, bool residual) {
  check_state("gat_layer", g, p.w_vert.dim(0), p.w_edge.dim(0));
  const std::size_t n = g.n_vertices();
  GraphState out;
  out.edges = g.edges;
  out.edge_features = g.edge_features;
  out.edge_weights = g.edge_weights;
  out.edge_dim = g.edge_dim;
  const Tensor z = matmul(g.vertices, p.w_vert);
  std::vector<double> isolated(n, 1.0);
  for (const auto& key : g.edges) isolated[key.i] = 0.0;
  const Tensor self = scale_rows(z, Tensor::from({n}, std::move(isolated)));
  if (g.edges.empty()) {
    out.vertices = finish_vertices(self, g.vertices, residual);
    return out;
  }
  const auto ep = endpoints(g);
  const Tensor alpha = gat_attention(g, p);
  const Tensor agg = scatter_add_rows(scale_rows(gather_rows(z, ep.dst), alpha), ep.src, n);
  out.vertices = finish_vertices(add(agg, self), g.vertices, residual);
  return out;
}

std::vector<Layer> make_layers(ParameterStore& store, const std::string& prefix, LayerKind kind,
                               std::size_t count, std::size_t k, std::size_t edge_in, Rng& rng) {
  std::vector<Layer> layers(count);
  for (std::size_t l = 0; l < count; ++l) {
    layers[l].kind = kind;
    const auto name = fmt::format("{}.{}", prefix, l);
    if (kind == LayerKind::Gated) {
      layers[l].gated = make_gated(store, name, k, l == 0 ? edge_in : k, rng);
    } else {
      layers[l].gat = make_gat(store, name, k, edge_in, rng);
    }
  }
  return layers;
}

GraphState apply_layers(const GraphState& g, std::span<const Layer> layers, bool residual) {
  GraphState s = g;
  for (const auto& layer : layers) {
    s = layer.kind == LayerKind::Gated ? gated_layer(s, layer.gated, residual)
                                       : gat_layer(s, layer.gat, residual);
  }
  return s;
}

LinkMode parse_link_mode(const std::string& name) {
  if (name == "vertices") return LinkMode::Vertices;
  if (name == "edge") return LinkMode::Edge;
  if (name == "vertices_edge") return LinkMode::VerticesPlusEdge;
  throw ConfigError("gnn.link_mode must be vertices, edge or vertices_edge, got '" + name + "'");
}

std::string to_string(LinkMode mode) {
  switch (mode) {
    case LinkMode::Vertices: return "vertices";
    case LinkMode::Edge: return "edge";
    case LinkMode::VerticesPlusEdge: return "vertices_edge";
  }
  return "?";
}

HeadParams make_head(ParameterStore& store, const std::string& prefix, const HeadConfig& cfg,
                     std::size_t k, std::size_t edge_dim, Rng& rng) {
  std::size_t in = k;
  const bool uses_edges = cfg.task == TaskKind::LinkClass && cfg.link_mode != LinkMode::Vertices;
  if (cfg.task == TaskKind::LinkClass) {
    switch (cfg.link_mode) {
      case LinkMode::Vertices: in = 2 * k; break;
      case LinkMode::Edge: in = k; break;
      case LinkMode::VerticesPlusEdge: in = 3 * k; break;
    }
  }
  HeadParams p;
  if (uses_edges && edge_dim != k) {
    if (edge_dim != 1) {
      throw DimensionError(fmt::format("head: edges of dimension {} are neither 1 nor K = {}", edge_dim, k));
    }
    p.edge_lift = store.add(prefix + ".edge_lift", glorot(1, k, rng));
  }
  const std::size_t h = cfg.hidden;
  p.w1 = store.add(prefix + ".w1", glorot(in, h, rng));
  p.b1 = store.add(prefix + ".b1", Tensor::zeros({1, h}));
  p.w2 = store.add(prefix + ".w2", glorot(h, h, rng));
  p.b2 = store.add(prefix + ".b2", Tensor::zeros({1, h}));
  p.w3 = store.add(prefix + ".w3", glorot(h, cfg.classes, rng));
  p.b3 = store.add(prefix + ".b3", Tensor::zeros({1, cfg.classes}));
  return p;
}

Tensor mlp(const Tensor& x, const HeadParams& p) {
  const Tensor h1 = relu(add_bias(matmul(x, p.w1), p.b1));
  const Tensor h2 = relu(add_bias(matmul(h1, p.w2), p.b2));
  return add_bias(matmul(h2, p.w3), p.b3);
}

Readout readout(const GraphState& g, std::span<const EdgeKey> link_queries, const HeadParams& p,
                const HeadConfig& cfg) {
  Readout r;
  const std::size_t n = g.n_vertices();
  switch (cfg.task) {
    case TaskKind::GraphClass: {
      const Tensor pooled = mean(g.vertices, 0);
      r.logits = mlp(reshape(pooled, {1, pooled.numel()}), p);
      return r;
    }
    case TaskKind::VertexClass: r.logits = mlp(g.vertices, p); return r;
    case TaskKind::LinkClass: break;
  }
  if (link_queries.empty()) throw ContractError("readout: link task without queried pairs");
  std::vector<std::size_t> qi, qj;
  for (const auto& q : link_queries) {
    if (q.i >= n || q.j >= n) throw ContractError(fmt::format("readout: pair ({},{}) out of range", q.i, q.j));
    qi.push_back(q.i);
    qj.push_back(q.j);
  }
  std::vector<Tensor> parts;
  if (cfg.link_mode != LinkMode::Edge) {
    parts.push_back(gather_rows(g.vertices, qi));
    parts.push_back(gather_rows(g.vertices, qj));
  }
  if (cfg.link_mode != LinkMode::Vertices) {
    std::vector<std::size_t> rows;
    for (const auto& q : link_queries) {
      const auto it = std::lower_bound(g.edges.begin(), g.edges.end(), q);
      if (it != g.edges.end() && *it == q) {
        rows.push_back(static_cast<std::size_t>(it - g.edges.begin()));
      } else {
        rows.push_back(kNoIndex);
        r.missing_edges.push_back(q);
      }
    }
    Tensor e;
    if (g.edges.empty()) {
      e = Tensor::zeros({link_queries.size(), g.edge_dim});
    } else {
      e = gather_rows(g.edge_features, rows);
    }
    if (p.edge_lift.defined()) e = matmul(e, p.edge_lift);
    parts.push_back(e);
    if (!r.missing_edges.empty()) {
      log_warning(fmt::format("readout: {} queried pairs have no edge feature; using zeros",
                              r.missing_edges.size()));
    }
  }
  r.logits = mlp(parts.size() == 1 ? parts.front() : concat(parts, 1), p);
  return r;
}

}  // namespace gratis::gnn
