#pragma once

// Seeded synthetic datasets. Sample s is drawn from its own generator seeded
// with (seed, s), so every sample is a pure function of the config.

#include <cstdint>
#include <vector>

#include "gratis/graph.hpp"

namespace gratis::datagen {

/// Planted-partition graphs for vertex classification.
struct SbmConfig {
  std::size_t n_vertices = 40;
  std::size_t n_communities = 2;
  double p_in = 0.5;
  double p_out = 0.05;
  double feature_noise = 1.0;
  std::size_t n_samples = 100;
  std::uint64_t seed = 0;
};

/// Graph classification: class 0 draws all vertex features from one
/// Gaussian cluster, class 1 from two clusters `separation` apart.
struct GraphClassConfig {
  std::size_t n_vertices = 12;
  std::size_t feature_dim = 2;
  std::size_t knn_c = 3;
  double separation = 4.0;
  double cluster_std = 0.5;
  std::size_t n_samples = 100;
  std::uint64_t seed = 0;
};

/// Four-class co-occurrence links. Binary states follow an Ising model with
/// symmetric couplings J (spins 2s-1). Vertex i's features are σ_i·u plus
/// noise (u one unit vector of dimension feature_dim) followed by one-hot(i).
struct CoOccurConfig {
  std::size_t n_vertices = 8;
  std::vector<double> coupling;  // [N×N] symmetric, zero diagonal; empty means all zero
  double field = 0.0;
  std::size_t gibbs_sweeps = 50;
  std::size_t feature_dim = 4;
  double feature_noise = 0.5;
  std::size_t n_samples = 100;
  std::uint64_t seed = 0;
};

/// Couplings `within` inside consecutive equal-size groups and `between` across.
std::vector<double> block_coupling(std::size_t n, std::size_t groups, double within, double between);

/// Geometric knn graphs; edge (i, j) is positive iff i and j are mutual
/// 2-nearest neighbours.
struct BinaryLinksConfig {
  std::size_t n_vertices = 20;
  std::size_t knn_c = 4;
  std::size_t n_samples = 100;
  std::uint64_t seed = 0;
};

std::vector<GraphSample> gen_sbm(const SbmConfig& cfg);
std::vector<GraphSample> gen_graph_class(const GraphClassConfig& cfg);
std::vector<GraphSample> gen_cooccur_links(const CoOccurConfig& cfg);
std::vector<GraphSample> gen_binary_links(const BinaryLinksConfig& cfg);

/// Hidden activation states of one co-occurrence sample (for tests).
std::vector<bool> sample_ising(const CoOccurConfig& cfg, std::uint64_t sample_index);

}  // namespace gratis::datagen
