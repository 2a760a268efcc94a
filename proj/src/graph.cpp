#include "gratis/graph.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "gratis/error.hpp"

namespace gratis {

EdgeFeatureStore::EdgeFeatureStore(std::size_t edge_dim) : edge_dim_(edge_dim) {
  if (edge_dim == 0) throw DimensionError("edge feature dimension must be positive");
}

void EdgeFeatureStore::set(EdgeKey key, std::vector<double> feature) {
  if (feature.size() != edge_dim_) {
    throw DimensionError(fmt::format("edge ({},{}) has dimension {}, store holds {}", key.i, key.j,
                                     feature.size(), edge_dim_));
  }
  features_[key] = std::move(feature);
}

const std::vector<double>* EdgeFeatureStore::find(EdgeKey key) const {
  auto it = features_.find(key);
  return it == features_.end() ? nullptr : &it->second;
}

std::vector<EdgeKey> EdgeFeatureStore::keys() const {
  std::vector<EdgeKey> out;
  out.reserve(features_.size());
  for (const auto& [k, _] : features_) out.push_back(k);
  return out;
}

EdgeFeatureStore EdgeFeatureStore::unit_from_adjacency(const Tensor& adjacency) {
  EdgeFeatureStore store(1);
  const std::size_t n = adjacency.dim(0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && adjacency.at(i, j) != 0.0) store.set({i, j}, {1.0});
    }
  }
  return store;
}

const char* to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::GraphClass: return "graph";
    case TaskKind::VertexClass: return "vertex";
    case TaskKind::LinkClass: return "link";
  }
  return "?";
}

TaskLabels TaskLabels::graph(std::size_t label) {
  TaskLabels t;
  t.kind = TaskKind::GraphClass;
  t.graph_label = label;
  return t;
}

TaskLabels TaskLabels::vertex(std::vector<std::size_t> labels) {
  TaskLabels t;
  t.kind = TaskKind::VertexClass;
  t.vertex_labels = std::move(labels);
  return t;
}

TaskLabels TaskLabels::link(std::map<EdgeKey, std::size_t> labels) {
  TaskLabels t;
  t.kind = TaskKind::LinkClass;
  t.link_labels = std::move(labels);
  return t;
}

std::vector<std::string> validate(const GraphSample& g) {
  std::vector<std::string> v;
  const std::size_t n = g.n_vertices;
  if (n == 0) v.emplace_back("n_vertices must be positive");
  if (g.vertex_dim == 0) v.emplace_back("vertex_dim must be positive");
  if (!g.vertices.defined() || g.vertices.shape() != Shape{n, g.vertex_dim}) {
    v.push_back(fmt::format("vertices must have shape [{}x{}]", n, g.vertex_dim));
  }
  const bool adj_ok = g.adjacency.defined() && g.adjacency.shape() == Shape{n, n};
  if (!adj_ok) v.push_back(fmt::format("adjacency must have shape [{}x{}]", n, n));
  if (adj_ok) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double a = g.adjacency.at(i, j);
        if (a != 0.0 && a != 1.0) v.push_back(fmt::format("non-binary adjacency at ({},{})", i, j));
      }
      if (g.adjacency.at(i, i) != 0.0) v.push_back(fmt::format("nonzero diagonal at {}", i));
    }
  }
  for (const auto& [key, feat] : g.edges.entries()) {
    if (key.i >= n || key.j >= n) {
      v.push_back(fmt::format("edge feature at ({},{}) out of range", key.i, key.j));
      continue;
    }
    if (adj_ok && g.adjacency.at(key.i, key.j) != 1.0) {
      v.push_back(fmt::format("edge feature at ({},{}) without adjacency", key.i, key.j));
    }
    if (feat.size() != g.edges.edge_dim()) {
      v.push_back(fmt::format("edge feature at ({},{}) has dimension {}", key.i, key.j, feat.size()));
    }
  }
  const auto& l = g.labels;
  const bool has_g = l.graph_label.has_value(), has_v = l.vertex_labels.has_value(),
             has_l = l.link_labels.has_value();
  const int present = int(has_g) + int(has_v) + int(has_l);
  const bool matches = (l.kind == TaskKind::GraphClass && has_g) ||
                       (l.kind == TaskKind::VertexClass && has_v) ||
                       (l.kind == TaskKind::LinkClass && has_l);
  if (present != 1 || !matches) {
    v.push_back(fmt::format("labels must hold exactly the '{}' field", to_string(l.kind)));
  }
  if (has_v && l.vertex_labels->size() != n) {
    v.push_back(fmt::format("vertex_labels has {} entries for {} vertices", l.vertex_labels->size(), n));
  }
  if (has_l) {
    for (const auto& [key, _] : *l.link_labels) {
      if (key.i >= n || key.j >= n || key.i == key.j) {
        v.push_back(fmt::format("link label at invalid pair ({},{})", key.i, key.j));
      }
    }
  }
  return v;
}

std::vector<std::size_t> invert_permutation(std::span<const std::size_t> perm) {
  std::vector<std::size_t> inv(perm.size(), kNoIndex);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] >= perm.size() || inv[perm[i]] != kNoIndex) {
      throw ContractError("permutation is not a bijection");
    }
    inv[perm[i]] = i;
  }
  return inv;
}

GraphSample permute(const GraphSample& g, std::span<const std::size_t> perm) {
  if (perm.size() != g.n_vertices) {
    throw ContractError(fmt::format("permutation of length {} for {} vertices", perm.size(), g.n_vertices));
  }
  invert_permutation(perm);  // bijection check
  const std::size_t n = g.n_vertices, k = g.vertex_dim;
  GraphSample out;
  out.n_vertices = n;
  out.vertex_dim = k;

  std::vector<double> verts(n * k), adj(n * n);
  auto vin = g.vertices.data();
  auto ain = g.adjacency.data();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(vin.begin() + static_cast<std::ptrdiff_t>(i * k), k,
                verts.begin() + static_cast<std::ptrdiff_t>(perm[i] * k));
    for (std::size_t j = 0; j < n; ++j) adj[perm[i] * n + perm[j]] = ain[i * n + j];
  }
  out.vertices = Tensor::from({n, k}, std::move(verts));
  out.adjacency = Tensor::from({n, n}, std::move(adj));

  out.edges = EdgeFeatureStore(g.edges.edge_dim());
  for (const auto& [key, feat] : g.edges.entries()) out.edges.set({perm[key.i], perm[key.j]}, feat);

  out.labels.kind = g.labels.kind;
  out.labels.graph_label = g.labels.graph_label;
  if (g.labels.vertex_labels) {
    std::vector<std::size_t> vl(n);
    for (std::size_t i = 0; i < n; ++i) vl[perm[i]] = (*g.labels.vertex_labels)[i];
    out.labels.vertex_labels = std::move(vl);
  }
  if (g.labels.link_labels) {
    std::map<EdgeKey, std::size_t> ll;
    for (const auto& [key, c] : *g.labels.link_labels) ll[{perm[key.i], perm[key.j]}] = c;
    out.labels.link_labels = std::move(ll);
  }
  return out;
}

namespace {

bool same_values(const Tensor& a, const Tensor& b) {
  if (a.defined() != b.defined()) return false;
  if (!a.defined()) return true;
  if (a.shape() != b.shape()) return false;
  auto x = a.data(), y = b.data();
  return std::equal(x.begin(), x.end(), y.begin());
}

}  // namespace

bool structurally_equal(const GraphSample& a, const GraphSample& b) {
  return a.n_vertices == b.n_vertices && a.vertex_dim == b.vertex_dim &&
         same_values(a.vertices, b.vertices) && same_values(a.adjacency, b.adjacency) &&
         a.edges.edge_dim() == b.edges.edge_dim() && a.edges.entries() == b.edges.entries() &&
         a.labels.kind == b.labels.kind && a.labels.graph_label == b.labels.graph_label &&
         a.labels.vertex_labels == b.labels.vertex_labels &&
         a.labels.link_labels == b.labels.link_labels;
}

std::vector<std::size_t> out_degrees(const GraphSample& g) {
  std::vector<std::size_t> d(g.n_vertices, 0);
  for (std::size_t i = 0; i < g.n_vertices; ++i) {
    for (std::size_t j = 0; j < g.n_vertices; ++j) d[i] += g.adjacency.at(i, j) != 0.0 ? 1 : 0;
  }
  return d;
}

}  // namespace gratis
