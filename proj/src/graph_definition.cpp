#include "gratis/graph_definition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "gratis/error.hpp"
#include "gratis/log.hpp"

namespace gratis::gd {

AdjacencyRule AdjacencyRule::parse(const std::string& name, std::optional<std::size_t> c) {
  AdjacencyRule r;
  if (name == "provided") r.kind = RuleKind::Provided;
  else if (name == "full") r.kind = RuleKind::FullyConnected;
  else if (name == "knn_l1") r.kind = RuleKind::KnnL1;
  else if (name == "knn_l2") r.kind = RuleKind::KnnL2;
  else if (name == "knn_mah") r.kind = RuleKind::KnnMahalanobis;
  else throw ConfigError("unknown adjacency rule '" + name + "'");
  if (r.is_knn()) {
    if (!c || *c == 0) throw ConfigError("knn adjacency rules need a neighbour count c >= 1");
    r.c = c;
  }
  return r;
}

std::string AdjacencyRule::name() const {
  switch (kind) {
    case RuleKind::Provided: return "provided";
    case RuleKind::FullyConnected: return "full";
    case RuleKind::KnnL1: return "knn_l1";
    case RuleKind::KnnL2: return "knn_l2";
    case RuleKind::KnnMahalanobis: return "knn_mah";
  }
  return "?";
}

VfeParams make_vfe(ParameterStore& store, const std::string& prefix, std::size_t n_vertices,
                   std::size_t token_dim, std::size_t k, Rng& rng) {
  VfeParams p;
  for (std::size_t i = 0; i < n_vertices; ++i) {
    p.extractors.push_back(store.add(fmt::format("{}.{}", prefix, i), glorot(token_dim, k, rng)));
  }
  return p;
}

GraphSample define_basic_from_graph(const GraphSample& g_in) { return g_in; }

Tensor vfe_extract(const backbone::GlobalContext& x, const VfeParams& params) {
  const std::size_t n = x.n_vertices();
  if (params.extractors.size() != n) {
    throw DimensionError(fmt::format("vfe_extract: {} extractors for {} vertices",
                                     params.extractors.size(), n));
  }
  const std::size_t td = x.token_dim();
  std::vector<Tensor> rows;
  rows.reserve(n);
  if (x.kind == backbone::ContextKind::Flat) {
    for (std::size_t i = 0; i < n; ++i) {
      if (params.extractors[i].dim(0) != td) throw DimensionError("vfe_extract: extractor input dim");
      const std::size_t idx[] = {i};
      rows.push_back(matmul(gather_rows(x.flat, idx), params.extractors[i]));
    }
  } else {
    const Tensor slices = reshape(x.cube, {n, n * td});
    for (std::size_t i = 0; i < n; ++i) {
      if (params.extractors[i].dim(0) != td) throw DimensionError("vfe_extract: extractor input dim");
      const std::size_t idx[] = {i};
      const Tensor tokens = reshape(gather_rows(slices, idx), {n, td});
      const Tensor pooled = mean(matmul(tokens, params.extractors[i]), 0);
      rows.push_back(reshape(pooled, {1, pooled.numel()}));
    }
  }
  return concat(rows, 0);
}

namespace {

std::vector<double> pairwise_distances(const Tensor& v, Metric metric) {
  const std::size_t n = v.dim(0), k = v.dim(1);
  std::vector<double> dist(n * n, 0.0);
  if (metric == Metric::Mahalanobis) {
    Eigen::MatrixXd x(n, k);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < k; ++c) x(Eigen::Index(i), Eigen::Index(c)) = v.at(i, c);
    }
    const Eigen::RowVectorXd mu = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mu;
    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
    cov.diagonal().array() += 1e-6;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-14) {
      log_warning("Mahalanobis covariance not invertible; falling back to Euclidean distance");
      return pairwise_distances(v, Metric::L2);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const Eigen::VectorXd d = (x.row(Eigen::Index(i)) - x.row(Eigen::Index(j))).transpose();
        dist[i * n + j] = std::sqrt(std::max(0.0, d.dot(ldlt.solve(d))));
      }
    }
    return dist;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        const double d = v.at(i, c) - v.at(j, c);
        s += metric == Metric::L1 ? std::abs(d) : d * d;
      }
      dist[i * n + j] = metric == Metric::L1 ? s : std::sqrt(s);
    }
  }
  return dist;
}

}  // namespace

Tensor knn_adjacency(const Tensor& vertices, std::size_t c, Metric metric) {
  if (vertices.rank() != 2) throw DimensionError("knn_adjacency: expected [N×K] vertices");
  const std::size_t n = vertices.dim(0);
  if (c < 1 || c >= n) {
    throw ContractError(fmt::format("knn_adjacency: c = {} outside [1, {}]", c, n == 0 ? 0 : n - 1));
  }
  const auto dist = pairwise_distances(vertices, metric);
  std::vector<double> adj(n * n, 0.0);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    order.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return dist[i * n + a] < dist[i * n + b];
    });
    for (std::size_t r = 0; r < c; ++r) adj[i * n + order[r]] = 1.0;
  }
  return Tensor::from({n, n}, std::move(adj));
}

Tensor basic_adjacency(const Tensor& vertices, const AdjacencyRule& rule) {
  const std::size_t n = vertices.dim(0);
  switch (rule.kind) {
    case RuleKind::Provided:
      throw ContractError("basic_adjacency: the provided rule takes the input graph's adjacency");
    case RuleKind::FullyConnected: {
      std::vector<double> adj(n * n, 1.0);
      for (std::size_t i = 0; i < n; ++i) adj[i * n + i] = 0.0;
      return Tensor::from({n, n}, std::move(adj));
    }
    case RuleKind::KnnL1: return knn_adjacency(vertices, rule.c.value_or(0), Metric::L1);
    case RuleKind::KnnL2: return knn_adjacency(vertices, rule.c.value_or(0), Metric::L2);
    case RuleKind::KnnMahalanobis:
      return knn_adjacency(vertices, rule.c.value_or(0), Metric::Mahalanobis);
  }
  throw ContractError("basic_adjacency: unknown rule");
}

}  // namespace gratis::gd
