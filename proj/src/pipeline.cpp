#include "gratis/pipeline.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "gratis/error.hpp"

namespace gratis::pipeline {

InputKind parse_input_kind(const std::string& name) {
  if (name == "graph") return InputKind::Graph;
  if (name == "vector_set") return InputKind::VectorSet;
  throw ConfigError("input.kind must be graph or vector_set, got '" + name + "'");
}

Ablation parse_ablation(const std::string& name) {
  if (name == "baseline") return Ablation::Baseline;
  if (name == "ttp") return Ablation::TtpOnly;
  if (name == "mefg") return Ablation::MefgOnly;
  if (name == "ttp_mefg") return Ablation::TtpMefg;
  throw ConfigError("pipeline.ablation must be baseline, ttp, mefg or ttp_mefg, got '" + name + "'");
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::Baseline: return "baseline";
    case Ablation::TtpOnly: return "ttp";
    case Ablation::MefgOnly: return "mefg";
    case Ablation::TtpMefg: return "ttp_mefg";
  }
  return "?";
}

Ablation PipelineConfig::ablation() const {
  if (ttp) return mefg ? Ablation::TtpMefg : Ablation::TtpOnly;
  return mefg ? Ablation::MefgOnly : Ablation::Baseline;
}

void PipelineConfig::set_ablation(Ablation a) {
  ttp = a == Ablation::TtpOnly || a == Ablation::TtpMefg;
  mefg = a == Ablation::MefgOnly || a == Ablation::TtpMefg;
}

ModelDims dims_of(std::span<const GraphSample> data) {
  if (data.empty()) throw ContractError("dims_of: empty dataset");
  ModelDims d{data.front().n_vertices, data.front().vertex_dim, data.front().edges.edge_dim()};
  for (const auto& g : data) {
    if (g.vertex_dim != d.input_dim || g.edges.edge_dim() != d.edge_dim) {
      throw ContractError("dataset mixes vertex or edge dimensions");
    }
  }
  return d;
}

std::vector<EdgeKey> adjacency_keys(const Tensor& a) {
  const std::size_t n = a.dim(0);
  auto x = a.data();
  std::vector<EdgeKey> keys;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (x[i * n + j] == 1.0) keys.push_back({i, j});
    }
  }
  return keys;
}

GratisModel::GratisModel(PipelineConfig cfg, ModelDims dims, std::uint64_t seed)
    : cfg_(std::move(cfg)), dims_(dims) {
  Rng rng(seed);
  const bool graph = cfg_.input_kind == InputKind::Graph;
  const std::size_t k = vertex_dim();
  if (k == 0) throw ConfigError("vertex dimension must be positive");
  if (graph && (cfg_.ttp || cfg_.mefg)) {
    backbone_ = backbone::make_gcn_cnn(store_, "backbone", k, cfg_.d_ctx, cfg_.backbone_gcn_layers, rng);
  }
  if (graph && cfg_.ttp) ttp_ = ttp::make_graph_params(store_, "ttp", cfg_.d_ctx, cfg_.theta, rng);
  if (!graph) {
    if (dims_.n_vertices == 0) throw ConfigError("vector-set input needs a fixed vertex count");
    vfe_ = gd::make_vfe(store_, "vfe", dims_.n_vertices, dims_.input_dim, k, rng);
    if (cfg_.ttp) {
      if (cfg_.ttp_c < 1 || cfg_.ttp_c >= dims_.n_vertices) {
        throw ConfigError(fmt::format("ttp.c = {} outside [1, {}]", cfg_.ttp_c, dims_.n_vertices - 1));
      }
      hat_vfe_ = gd::make_vfe(store_, "hat_vfe", dims_.n_vertices, dims_.input_dim, k, rng);
    }
  }
  std::size_t edge_in = graph ? dims_.edge_dim : 1;
  if (cfg_.mefg) {
    const std::size_t token = graph ? cfg_.d_ctx : dims_.input_dim;
    mefg_ = mefg::make_params(store_, "mefg", k, token, cfg_.d_model ? cfg_.d_model : token, rng);
    edge_in = k;
  }
  layers_ = gnn::make_layers(store_, "gnn", cfg_.gnn_kind, cfg_.gnn_layers, k, edge_in, rng);
  const std::size_t head_edge =
      cfg_.gnn_kind == gnn::LayerKind::Gated && cfg_.gnn_layers > 0 ? k : edge_in;
  head_ = gnn::make_head(store_, "head", cfg_.head, k, head_edge, rng);

  if (has_pretraining()) {
    const std::size_t h = cfg_.pretrain_hidden, c = cfg_.head.classes;
    const std::size_t pooled = cfg_.head.task == TaskKind::LinkClass ? 2 * h : h;
    pre1_.w1 = store_.add("pre1.w1", glorot(k, h, rng));
    pre1_.b1 = store_.add("pre1.b1", Tensor::zeros({1, h}));
    pre1_.w2 = store_.add("pre1.w2", glorot(pooled, c, rng));
    pre1_.b2 = store_.add("pre1.b2", Tensor::zeros({1, c}));
    pre2_gcn_.push_back(store_.add("pre2.gcn0", glorot(k, h, rng)));
    pre2_gcn_.push_back(store_.add("pre2.gcn1", glorot(h, h, rng)));
    pre2_.w2 = store_.add("pre2.w2", glorot(pooled, c, rng));
    pre2_.b2 = store_.add("pre2.b2", Tensor::zeros({1, c}));
  }
}

std::size_t GratisModel::vertex_dim() const {
  return cfg_.input_kind == InputKind::Graph ? dims_.input_dim : cfg_.vfe_k;
}

std::vector<Parameter> GratisModel::collect(std::span<const std::string> prefixes) const {
  return store_.with_prefix(prefixes);
}

std::vector<Parameter> GratisModel::pipeline_parameters() const {
  const std::string prefixes[] = {"backbone.", "ttp.", "vfe.", "hat_vfe.", "mefg.", "gnn.", "head."};
  return collect(prefixes);
}

std::vector<Parameter> GratisModel::phase1_parameters() const {
  const std::string prefixes[] = {"vfe.", "pre1."};
  return collect(prefixes);
}

std::vector<Parameter> GratisModel::phase2_parameters() const {
  const std::string prefixes[] = {"hat_vfe.", "pre2."};
  return collect(prefixes);
}

Tensor GratisModel::basic_adjacency(const GraphSample& sample, const Tensor& v) const {
  if (cfg_.input_kind == InputKind::Graph || cfg_.rule.kind == gd::RuleKind::Provided) return sample.adjacency;
  return gd::basic_adjacency(v.detach(), cfg_.rule);
}

gnn::GraphState GratisModel::enhance_state(const GraphSample& sample) const {
  const std::size_t n = sample.n_vertices;
  if (sample.vertex_dim != dims_.input_dim) {
    throw DimensionError(fmt::format("sample vertex dimension {} but the model expects {}", sample.vertex_dim,
                                     dims_.input_dim));
  }
  if (cfg_.input_kind == InputKind::Graph) {
    if (!cfg_.ttp && !cfg_.mefg) return gnn::state_from_sample(gd::define_basic_from_graph(sample));
    const Tensor xg = backbone::gcn_encode(sample.vertices, sample.adjacency, backbone_.gcn_weights);
    const backbone::GlobalContext ctx{.kind = backbone::ContextKind::Cube,
                                      .cube = backbone::global_context_cube(xg, backbone_),
                                      .flat = {}};
    Tensor a_hat = sample.adjacency;
    Tensor prob;
    if (cfg_.ttp) {
      prob = ttp::adjacency_prob(ctx.cube, ttp_);
      a_hat = ttp::threshold_union(prob, sample.adjacency, cfg_.theta);
    }
    gnn::GraphState s;
    s.vertices = sample.vertices;
    s.edges = adjacency_keys(a_hat);
    if (cfg_.mefg) {
      s.edge_dim = vertex_dim();
      if (!s.edges.empty()) s.edge_features = mefg::edge_features(s.edges, sample.vertices, ctx, mefg_);
    } else {
      s.edge_dim = sample.edges.edge_dim();
      std::vector<double> rows;
      for (const auto& key : s.edges) {
        const auto* f = sample.edges.find(key);
        if (f) rows.insert(rows.end(), f->begin(), f->end());
        else rows.insert(rows.end(), s.edge_dim, 1.0);
      }
      if (!s.edges.empty()) s.edge_features = Tensor::from({s.edges.size(), s.edge_dim}, std::move(rows));
    }
    if (cfg_.ttp && cfg_.straight_through && !s.edges.empty()) {
      std::vector<std::size_t> flat;
      for (const auto& key : s.edges) flat.push_back(key.i * n + key.j);
      s.edge_weights = reshape(gather_rows(reshape(prob, {n * n, 1}), flat), {s.edges.size()});
    }
    return s;
  }

  if (n != dims_.n_vertices) {
    throw DimensionError(fmt::format("vector set of {} vectors but the model expects {}", n, dims_.n_vertices));
  }
  const backbone::GlobalContext ctx = backbone::vector_set_context(sample.vertices);
  const Tensor v = gd::vfe_extract(ctx, vfe_);
  Tensor a_hat = basic_adjacency(sample, v);
  gnn::GraphState s;
  s.vertices = v;
  if (cfg_.ttp) {
    const Tensor v_hat = gd::vfe_extract(ctx, hat_vfe_);
    a_hat = ttp::union_adjacency(ttp::knn_vertex_adjacency(v_hat, cfg_.ttp_c), a_hat);
    s.vertices = v_hat;
  }
  s.edges = adjacency_keys(a_hat);
  if (cfg_.mefg) {
    s.edge_dim = vertex_dim();
    if (!s.edges.empty()) s.edge_features = mefg::edge_features(s.edges, s.vertices, ctx, mefg_);
  } else {
    s.edge_dim = 1;
    if (!s.edges.empty()) s.edge_features = Tensor::full({s.edges.size(), 1}, 1.0);
  }
  return s;
}

GraphSample GratisModel::enhance(const GraphSample& sample) const {
  NoGradGuard no_grad;
  return gnn::sample_from_state(enhance_state(sample), sample.labels);
}

gnn::GraphState GratisModel::encode(const GraphSample& sample) const {
  return gnn::apply_layers(enhance_state(sample), layers_, cfg_.residual);
}

gnn::Readout GratisModel::forward(const GraphSample& sample) const {
  if (sample.labels.kind != cfg_.head.task) {
    throw ContractError(fmt::format("sample labels are {} but the head predicts {}", to_string(sample.labels.kind),
                                    to_string(cfg_.head.task)));
  }
  const gnn::GraphState s = encode(sample);
  const auto queries = train::link_queries(sample);
  return gnn::readout(s, queries, head_, cfg_.head);
}

Tensor GratisModel::pooled_linear(const Tensor& z, const GraphSample& sample, const PretrainHead& head) const {
  switch (cfg_.head.task) {
    case TaskKind::GraphClass: {
      const Tensor pooled = mean(z, 0);
      return add_bias(matmul(reshape(pooled, {1, pooled.numel()}), head.w2), head.b2);
    }
    case TaskKind::VertexClass: return add_bias(matmul(z, head.w2), head.b2);
    case TaskKind::LinkClass: break;
  }
  std::vector<std::size_t> qi, qj;
  for (const auto& q : train::link_queries(sample)) {
    qi.push_back(q.i);
    qj.push_back(q.j);
  }
  return add_bias(matmul(concat({gather_rows(z, qi), gather_rows(z, qj)}, 1), head.w2), head.b2);
}

Tensor GratisModel::phase1_logits(const GraphSample& sample) const {
  if (!has_pretraining()) throw ContractError("phase1_logits: model has no pretraining stage");
  const Tensor v = gd::vfe_extract(backbone::vector_set_context(sample.vertices), vfe_);
  return pooled_linear(relu(add_bias(matmul(v, pre1_.w1), pre1_.b1)), sample, pre1_);
}

Tensor GratisModel::phase2_logits(const GraphSample& sample) const {
  if (!has_pretraining()) throw ContractError("phase2_logits: model has no pretraining stage");
  const Tensor v_hat = gd::vfe_extract(backbone::vector_set_context(sample.vertices), hat_vfe_);
  const Tensor a_norm = backbone::normalized_adjacency(ttp::knn_vertex_adjacency(v_hat, cfg_.ttp_c));
  const Tensor h1 = relu(matmul(matmul(a_norm, v_hat), pre2_gcn_[0]));
  const Tensor h2 = relu(matmul(matmul(a_norm, h1), pre2_gcn_[1]));
  return pooled_linear(h2, sample, pre2_);
}

void GratisModel::hand_off_vfe() {
  for (std::size_t i = 0; i < vfe_.extractors.size(); ++i) {
    auto src = vfe_.extractors[i].data();
    Tensor dst = hat_vfe_.extractors[i];
    std::copy(src.begin(), src.end(), dst.mutable_data().begin());
  }
}

TwoPhaseResult train_nongraph_two_phase(GratisModel& model, std::span<const GraphSample> data,
                                        const train::TrainConfig& cfg, std::size_t phase1_epochs,
                                        std::size_t phase2_epochs, train::MetricLog* log) {
  if (data.empty()) throw ContractError("train_nongraph_two_phase: empty dataset");
  if (!model.has_pretraining()) {
    throw ContractError("train_nongraph_two_phase: needs vector-set input with topology prediction");
  }
  const std::size_t classes = model.config().head.classes;
  const train::AdamWConfig opt{.weight_decay = cfg.weight_decay};
  TwoPhaseResult r;

  train::TrainConfig c1 = cfg;
  c1.epochs = phase1_epochs;
  train::AdamW opt1(model.phase1_parameters(), opt);
  r.phase1_loss = train::fit([&](const GraphSample& g) { return model.phase1_logits(g); }, opt1, data, c1,
                             classes, log, "phase1");

  model.hand_off_vfe();

  train::TrainConfig c2 = cfg;
  c2.epochs = phase2_epochs;
  c2.seed = cfg.seed + 1;
  train::AdamW opt2(model.phase2_parameters(), opt);
  r.phase2_loss = train::fit([&](const GraphSample& g) { return model.phase2_logits(g); }, opt2, data, c2,
                             classes, log, "phase2");
  return r;
}

}  // namespace gratis::pipeline
