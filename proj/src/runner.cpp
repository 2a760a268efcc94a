#include "gratis/runner.hpp"

#include <random>

#include "gratis/error.hpp"

namespace gratis::runner {

TrainOutcome train_model(pipeline::GratisModel& model, train::AdamW& optim, std::span<const GraphSample> data,
                         const train::TrainConfig& cfg, std::size_t phase1_epochs, train::MetricLog* log) {
  TrainOutcome out;
  if (model.has_pretraining()) {
    const std::size_t e1 = std::min(phase1_epochs, cfg.epochs);
    out.pretrain = pipeline::train_nongraph_two_phase(model, data, cfg, e1, cfg.epochs - e1, log);
  }
  out.loss = train::fit([&](const GraphSample& g) { return model.logits(g); }, optim, data, cfg,
                        model.config().head.classes, log, "train");
  return out;
}

train::MetricReport evaluate_model(const pipeline::GratisModel& model, std::span<const GraphSample> data,
                                   std::optional<std::size_t> hits_k) {
  const auto p = train::predict([&](const GraphSample& g) { return model.logits(g); }, data);
  return train::evaluate(p, model.config().head.classes, hits_k);
}

void log_report(train::MetricLog& log, std::size_t epoch, const std::string& split, const train::MetricReport& r) {
  log.record(epoch, split, "accuracy", r.accuracy);
  log.record(epoch, split, "macro_f1", r.macro_f1);
  log.record(epoch, split, "uar", r.uar);
  if (r.hits_at_k) log.record(epoch, split, "hits_at_k", *r.hits_at_k);
}

GraphSample gradcheck_sample(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw ConfigError("key 'gradcheck.vertices': need at least 2 vertices");
  Rng rng(seed);
  constexpr std::size_t k = 3;
  std::uniform_real_distribution<double> u(-1.0, 1.0), coin(0.0, 1.0);
  std::vector<double> feats(n * k), adj(n * n, 0.0);
  for (auto& x : feats) x = u(rng);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && coin(rng) < 0.5) adj[i * n + j] = 1.0;
    }
  }
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % 2;
  GraphSample g;
  g.n_vertices = n;
  g.vertex_dim = k;
  g.vertices = Tensor::from({n, k}, std::move(feats));
  g.adjacency = Tensor::from({n, n}, std::move(adj));
  g.edges = EdgeFeatureStore::unit_from_adjacency(g.adjacency);
  g.labels = TaskLabels::vertex(std::move(labels));
  return g;
}

GradCheckReport gradcheck_pipeline(const config::RunConfig& c) {
  const auto s = config::seed(c);
  const GraphSample g = gradcheck_sample(c.get_uint("gradcheck.vertices"), s);
  pipeline::PipelineConfig p;
  p.input_kind = pipeline::InputKind::Graph;
  p.set_ablation(pipeline::Ablation::TtpMefg);
  p.straight_through = true;
  p.theta = c.get_double("ttp.theta");
  p.d_ctx = c.get_uint("backbone.d");
  p.backbone_gcn_layers = c.get_uint("backbone.gcn_layers");
  p.d_model = c.get_uint("mefg.d_model");
  p.gnn_kind = gnn::parse_layer_kind(c.get("gnn.kind"));
  p.gnn_layers = 2;
  p.residual = c.get_bool("gnn.residual");
  p.head = {.task = TaskKind::VertexClass, .link_mode = gnn::LinkMode::Vertices, .hidden = 8, .classes = 2};
  const pipeline::GratisModel model(p, pipeline::dims_of(std::span(&g, 1)), s);
  const auto labels = train::sample_targets(g);
  const auto params = model.pipeline_parameters();
  return grad_check([&] { return train::cross_entropy(model.logits(g), labels); }, params,
                    c.get_double("gradcheck.eps"));
}

}  // namespace gratis::runner
