#include "gratis/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "gratis/error.hpp"
#include "gratis/graph_definition.hpp"

namespace gratis::datagen {

namespace {

enum Stream : std::uint64_t { kSbm = 1, kGraphClass = 2, kCoOccur = 3, kCoOccurBasis = 4, kLinks = 5 };

Rng sample_rng(std::uint64_t seed, std::uint64_t index, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

GraphSample with_unit_edges(std::size_t n, std::size_t dim, std::vector<double> features, std::vector<double> adj,
                            TaskLabels labels) {
  GraphSample g;
  g.n_vertices = n;
  g.vertex_dim = dim;
  g.vertices = Tensor::from({n, dim}, std::move(features));
  g.adjacency = Tensor::from({n, n}, std::move(adj));
  g.edges = EdgeFeatureStore::unit_from_adjacency(g.adjacency);
  g.labels = std::move(labels);
  return g;
}

}  // namespace

std::vector<GraphSample> gen_sbm(const SbmConfig& cfg) {
  if (!(cfg.p_out >= 0.0 && cfg.p_out < cfg.p_in && cfg.p_in <= 1.0)) {
    throw ConfigError(fmt::format("sbm: need 0 <= p_out < p_in <= 1, got p_in = {}, p_out = {}", cfg.p_in, cfg.p_out));
  }
  if (cfg.n_communities == 0 || cfg.n_vertices < cfg.n_communities) {
    throw ConfigError("sbm: need 1 <= communities <= vertices");
  }
  const std::size_t n = cfg.n_vertices, c = cfg.n_communities;
  std::vector<GraphSample> out;
  out.reserve(cfg.n_samples);
  for (std::size_t s = 0; s < cfg.n_samples; ++s) {
    Rng rng = sample_rng(cfg.seed, s, kSbm);
    std::vector<std::size_t> label(n);
    for (std::size_t i = 0; i < n; ++i) label[i] = i % c;
    std::shuffle(label.begin(), label.end(), rng);
    std::vector<double> adj(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double p = label[i] == label[j] ? cfg.p_in : cfg.p_out;
        if (uniform01(rng) < p) adj[i * n + j] = adj[j * n + i] = 1.0;
      }
    }
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> feats(n * c, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < c; ++k) {
        feats[i * c + k] = (label[i] == k ? 1.0 : 0.0) + (cfg.feature_noise > 0 ? cfg.feature_noise * noise(rng) : 0.0);
      }
    }
    out.push_back(with_unit_edges(n, c, std::move(feats), std::move(adj), TaskLabels::vertex(std::move(label))));
  }
  return out;
}

std::vector<GraphSample> gen_graph_class(const GraphClassConfig& cfg) {
  if (cfg.n_vertices < 2 || cfg.feature_dim == 0) throw ConfigError("graphclass: need >= 2 vertices and dim >= 1");
  if (cfg.knn_c < 1 || cfg.knn_c >= cfg.n_vertices) throw ConfigError("graphclass: knn c outside [1, N-1]");
  const std::size_t n = cfg.n_vertices, d = cfg.feature_dim;
  std::vector<GraphSample> out;
  out.reserve(cfg.n_samples);
  for (std::size_t s = 0; s < cfg.n_samples; ++s) {
    Rng rng = sample_rng(cfg.seed, s, kGraphClass);
    const std::size_t label = s % 2;
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> dir(d);
    double norm = 0.0;
    for (auto& x : dir) {
      x = gauss(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : dir) x = norm > 0 ? x / norm : 1.0;
    std::vector<double> feats(n * d);
    for (std::size_t i = 0; i < n; ++i) {
      // Class 1 splits the vertices into two clusters at ±separation/2 along dir.
      const double side = label == 0 ? 0.0 : (i % 2 == 0 ? 0.5 : -0.5) * cfg.separation;
      for (std::size_t k = 0; k < d; ++k) {
        feats[i * d + k] = side * dir[k] + (cfg.cluster_std > 0 ? cfg.cluster_std * gauss(rng) : 0.0);
      }
    }
    const Tensor v = Tensor::from({n, d}, feats);
    auto adj = gd::knn_adjacency(v, cfg.knn_c, gd::Metric::L2).to_vector();
    out.push_back(with_unit_edges(n, d, std::move(feats), std::move(adj), TaskLabels::graph(label)));
  }
  return out;
}

std::vector<double> block_coupling(std::size_t n, std::size_t groups, double within, double between) {
  if (groups == 0 || groups > n) throw ConfigError("block_coupling: need 1 <= groups <= n");
  std::vector<double> j(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      j[a * n + b] = (a * groups / n) == (b * groups / n) ? within : between;
    }
  }
  return j;
}

namespace {

void check_coupling(const CoOccurConfig& cfg) {
  const std::size_t n = cfg.n_vertices;
  if (n < 2) throw ConfigError("cooccur: need at least 2 vertices");
  if (cfg.coupling.empty()) return;
  if (cfg.coupling.size() != n * n) throw ConfigError("cooccur: coupling must be N×N");
  for (std::size_t a = 0; a < n; ++a) {
    if (cfg.coupling[a * n + a] != 0.0) throw ConfigError("cooccur: coupling diagonal must be zero");
    for (std::size_t b = 0; b < a; ++b) {
      if (cfg.coupling[a * n + b] != cfg.coupling[b * n + a]) throw ConfigError("cooccur: coupling must be symmetric");
    }
  }
}

std::vector<bool> gibbs(const CoOccurConfig& cfg, Rng& rng) {
  const std::size_t n = cfg.n_vertices;
  std::vector<double> spin(n);
  for (auto& x : spin) x = uniform01(rng) < 0.5 ? 1.0 : -1.0;
  const std::size_t sweeps = std::max<std::size_t>(cfg.gibbs_sweeps, 1);
  for (std::size_t t = 0; t < sweeps; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      double field = cfg.field;
      if (!cfg.coupling.empty()) {
        for (std::size_t j = 0; j < n; ++j) field += cfg.coupling[i * n + j] * spin[j];
      }
      const double p_up = 1.0 / (1.0 + std::exp(-2.0 * field));
      spin[i] = uniform01(rng) < p_up ? 1.0 : -1.0;
    }
  }
  std::vector<bool> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = spin[i] > 0;
  return s;
}

}  // namespace

std::vector<bool> sample_ising(const CoOccurConfig& cfg, std::uint64_t sample_index) {
  check_coupling(cfg);
  Rng rng = sample_rng(cfg.seed, sample_index, kCoOccur);
  return gibbs(cfg, rng);
}

std::vector<GraphSample> gen_cooccur_links(const CoOccurConfig& cfg) {
  check_coupling(cfg);
  if (cfg.feature_dim == 0) throw ConfigError("cooccur: feature_dim must be positive");
  const std::size_t n = cfg.n_vertices, d = cfg.feature_dim, width = d + n;
  // One state direction shared by every vertex and sample of the dataset.
  Rng basis_rng = sample_rng(cfg.seed, 0, kCoOccurBasis);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> dir(d);
  double norm = 0.0;
  for (auto& x : dir) {
    x = gauss(basis_rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : dir) x /= norm;
  std::vector<double> full(n * n, 1.0);
  for (std::size_t i = 0; i < n; ++i) full[i * n + i] = 0.0;

  std::vector<GraphSample> out;
  out.reserve(cfg.n_samples);
  for (std::size_t s = 0; s < cfg.n_samples; ++s) {
    Rng rng = sample_rng(cfg.seed, s, kCoOccur);
    const auto state = gibbs(cfg, rng);
    // [noisy ±dir | one-hot vertex id]
    std::vector<double> feats(n * width, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double sign = state[i] ? 1.0 : -1.0;
      for (std::size_t k = 0; k < d; ++k) {
        feats[i * width + k] = sign * dir[k] + (cfg.feature_noise > 0 ? cfg.feature_noise * gauss(rng) : 0.0);
      }
      feats[i * width + d + i] = 1.0;
    }
    std::map<EdgeKey, std::size_t> links;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i != j) links[{i, j}] = 2 * std::size_t(state[i]) + std::size_t(state[j]);
      }
    }
    out.push_back(with_unit_edges(n, width, std::move(feats), full, TaskLabels::link(std::move(links))));
  }
  return out;
}

std::vector<GraphSample> gen_binary_links(const BinaryLinksConfig& cfg) {
  const std::size_t n = cfg.n_vertices;
  if (n < 3) throw ConfigError("links: need at least 3 vertices");
  if (cfg.knn_c < 2 || cfg.knn_c >= n) throw ConfigError("links: knn c outside [2, N-1]");
  std::vector<GraphSample> out;
  out.reserve(cfg.n_samples);
  for (std::size_t s = 0; s < cfg.n_samples; ++s) {
    Rng rng = sample_rng(cfg.seed, s, kLinks);
    std::vector<double> pts(n * 2);
    for (auto& x : pts) x = uniform01(rng);
    const Tensor v = Tensor::from({n, 2}, pts);
    const Tensor adj = gd::knn_adjacency(v, cfg.knn_c, gd::Metric::L2);
    const Tensor near2 = gd::knn_adjacency(v, 2, gd::Metric::L2);
    std::map<EdgeKey, std::size_t> links;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (adj.at(i, j) == 1.0) links[{i, j}] = near2.at(i, j) == 1.0 && near2.at(j, i) == 1.0 ? 1 : 0;
      }
    }
    out.push_back(with_unit_edges(n, 2, std::move(pts), adj.to_vector(), TaskLabels::link(std::move(links))));
  }
  return out;
}

}  // namespace gratis::datagen
