#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gratis/tensor.hpp"

namespace gratis {

/// Ordered vertex pair (i, j); edges are directed.
struct EdgeKey {
  std::size_t i = 0;
  std::size_t j = 0;
  auto operator<=>(const EdgeKey&) const = default;
};

/// Directed edge feature vectors keyed by (i, j), all of one dimension.
class EdgeFeatureStore {
 public:
  explicit EdgeFeatureStore(std::size_t edge_dim = 1);

  std::size_t edge_dim() const noexcept { return edge_dim_; }
  std::size_t size() const noexcept { return features_.size(); }
  bool empty() const noexcept { return features_.empty(); }

  /// Inserts or replaces. Throws DimensionError on a dimension mismatch.
  void set(EdgeKey key, std::vector<double> feature);
  bool contains(EdgeKey key) const { return features_.contains(key); }
  const std::vector<double>* find(EdgeKey key) const;

  const std::map<EdgeKey, std::vector<double>>& entries() const noexcept { return features_; }
  std::vector<EdgeKey> keys() const;

  /// Unit 1-dimensional edges for every nonzero off-diagonal entry.
  static EdgeFeatureStore unit_from_adjacency(const Tensor& adjacency);

 private:
  std::size_t edge_dim_;
  std::map<EdgeKey, std::vector<double>> features_;
};

enum class TaskKind { GraphClass, VertexClass, LinkClass };

const char* to_string(TaskKind kind);

struct TaskLabels {
  TaskKind kind = TaskKind::GraphClass;
  std::optional<std::size_t> graph_label;
  std::optional<std::vector<std::size_t>> vertex_labels;
  std::optional<std::map<EdgeKey, std::size_t>> link_labels;

  static TaskLabels graph(std::size_t label);
  static TaskLabels vertex(std::vector<std::size_t> labels);
  static TaskLabels link(std::map<EdgeKey, std::size_t> labels);
};

/// One input graph: N vertices of dimension K, binary zero-diagonal adjacency,
/// directed edge features and the task labels.
struct GraphSample {
  std::size_t n_vertices = 0;
  std::size_t vertex_dim = 0;
  Tensor vertices;   // [N×K]
  Tensor adjacency;  // [N×N], entries in {0,1}
  EdgeFeatureStore edges;
  TaskLabels labels;
};

/// Empty iff every GraphSample invariant holds. Never throws.
std::vector<std::string> validate(const GraphSample& g);

/// Relabels vertex i as perm[i]. Throws ContractError unless perm is a bijection.
GraphSample permute(const GraphSample& g, std::span<const std::size_t> perm);

std::vector<std::size_t> invert_permutation(std::span<const std::size_t> perm);

/// Exact equality of every numeric field and label.
bool structurally_equal(const GraphSample& a, const GraphSample& b);

/// Row sums of the adjacency matrix.
std::vector<std::size_t> out_degrees(const GraphSample& g);

// ---- line-delimited dataset files ----

std::string encode_record(const GraphSample& g);
/// `line` is only used in error messages.
GraphSample decode_record(const std::string& text, std::size_t line);

void write_dataset(std::span<const GraphSample> samples, const std::filesystem::path& path);
std::vector<GraphSample> read_dataset(const std::filesystem::path& path);

}  // namespace gratis
