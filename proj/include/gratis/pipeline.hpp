#pragma once

// End-to-end task-specific graph generation and prediction:
// backbone → graph definition → topology prediction → edge features → GNN.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gratis/backbone.hpp"
#include "gratis/gnn.hpp"
#include "gratis/graph_definition.hpp"
#include "gratis/mefg.hpp"
#include "gratis/training.hpp"
#include "gratis/ttp.hpp"

namespace gratis::pipeline {

enum class InputKind { Graph, VectorSet };
enum class Ablation { Baseline, TtpOnly, MefgOnly, TtpMefg };

InputKind parse_input_kind(const std::string& name);
Ablation parse_ablation(const std::string& name);
std::string to_string(Ablation a);

struct PipelineConfig {
  InputKind input_kind = InputKind::Graph;
  gd::AdjacencyRule rule;  // vector-set input only
  bool ttp = false;
  bool mefg = false;
  double theta = 0.5;
  std::size_t ttp_c = 3;
  bool straight_through = true;
  std::size_t d_ctx = 4;
  std::size_t backbone_gcn_layers = 2;
  std::size_t d_model = 0;  // 0: the context token dimension
  std::size_t vfe_k = 8;
  gnn::LayerKind gnn_kind = gnn::LayerKind::Gated;
  std::size_t gnn_layers = 4;
  bool residual = true;
  gnn::HeadConfig head;
  std::size_t pretrain_hidden = 32;

  Ablation ablation() const;
  void set_ablation(Ablation a);
};

/// Per-dataset sizes fixed at construction.
struct ModelDims {
  std::size_t n_vertices = 0;  // needed by the per-vertex extractors
  std::size_t input_dim = 0;   // vertex (graph) or vector (vector set) dimension
  std::size_t edge_dim = 1;    // stored edge dimension of graph input
};

ModelDims dims_of(std::span<const GraphSample> data);

class GratisModel {
 public:
  GratisModel(PipelineConfig cfg, ModelDims dims, std::uint64_t seed);

  const PipelineConfig& config() const { return cfg_; }
  const ModelDims& dims() const { return dims_; }
  ParameterStore& store() { return store_; }
  const ParameterStore& store() const { return store_; }

  /// Vertex dimension K seen by the GNN.
  std::size_t vertex_dim() const;
  /// Parameters trained with the full pipeline (pretraining heads excluded).
  std::vector<Parameter> pipeline_parameters() const;

  /// The enhanced graph as differentiable tensors.
  gnn::GraphState enhance_state(const GraphSample& sample) const;
  /// The enhanced graph as a plain sample carrying the input labels.
  GraphSample enhance(const GraphSample& sample) const;
  /// gnn_layers(enhance(sample)): the vertex and edge outputs before readout.
  gnn::GraphState encode(const GraphSample& sample) const;
  /// readout(encode(sample)).
  gnn::Readout forward(const GraphSample& sample) const;
  Tensor logits(const GraphSample& sample) const { return forward(sample).logits; }

  // ---- two-phase vector-set schedule ----
  bool has_pretraining() const { return cfg_.input_kind == InputKind::VectorSet && cfg_.ttp; }
  /// Phase 1: VFE + 2-layer MLP.
  Tensor phase1_logits(const GraphSample& sample) const;
  /// Phase 2: task-specific VFE + knn adjacency + 2-layer vanilla GCN.
  Tensor phase2_logits(const GraphSample& sample) const;
  std::vector<Parameter> phase1_parameters() const;
  std::vector<Parameter> phase2_parameters() const;
  /// Copies the phase-1 extractor values into the task-specific extractors.
  void hand_off_vfe();

  const gd::VfeParams& vfe() const { return vfe_; }
  const gd::VfeParams& hat_vfe() const { return hat_vfe_; }

 private:
  struct PretrainHead {
    Tensor w1, b1, w2, b2;
  };

  Tensor basic_adjacency(const GraphSample& sample, const Tensor& v) const;
  Tensor pooled_linear(const Tensor& z, const GraphSample& sample, const PretrainHead& head) const;
  std::vector<Parameter> collect(std::span<const std::string> prefixes) const;

  PipelineConfig cfg_;
  ModelDims dims_;
  ParameterStore store_;
  backbone::GcnCnnParams backbone_;
  ttp::TtpGraphParams ttp_;
  gd::VfeParams vfe_, hat_vfe_;
  mefg::MefgParams mefg_;
  std::vector<gnn::Layer> layers_;
  gnn::HeadParams head_;
  PretrainHead pre1_, pre2_;
  std::vector<Tensor> pre2_gcn_;
};

/// Adjacency keys (i, j) with a[i,j] = 1 in row-major order.
std::vector<EdgeKey> adjacency_keys(const Tensor& a);

struct TwoPhaseResult {
  std::vector<double> phase1_loss, phase2_loss;
};

/// Phase 1 for E1 epochs, handoff, phase 2 for E2 epochs. Throws on empty data.
TwoPhaseResult train_nongraph_two_phase(GratisModel& model, std::span<const GraphSample> data,
                                        const train::TrainConfig& cfg, std::size_t phase1_epochs,
                                        std::size_t phase2_epochs, train::MetricLog* log = nullptr);

}  // namespace gratis::pipeline
