#include "gratis/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "gratis/error.hpp"

namespace gratis::config {

const std::vector<KeyInfo>& schema() {
  static const std::vector<KeyInfo> keys = {
      {"seed", "0", "seed for data generation, initialization and shuffling (overridden by --seed)"},
      {"task.family", "sbm", "sbm | graphclass | cooccur | links"},
      {"task.classes", "auto", "class count; auto derives it from the family"},
      {"data.train", "", "training dataset path; empty means <out>/train.jsonl"},
      {"data.test", "", "test dataset path; empty means <out>/test.jsonl"},
      {"data.n_train", "400", "generated training samples"},
      {"data.n_test", "100", "generated test samples"},
      {"sbm.vertices", "40", "vertices per SBM graph"},
      {"sbm.communities", "2", "planted communities"},
      {"sbm.p_in", "0.5", "within-community edge probability"},
      {"sbm.p_out", "0.05", "cross-community edge probability"},
      {"sbm.noise", "1.0", "std of the Gaussian added to one-hot features"},
      {"graphclass.vertices", "12", "vertices per sample"},
      {"graphclass.dim", "2", "feature dimension"},
      {"graphclass.c", "3", "knn neighbours of the stored adjacency"},
      {"graphclass.separation", "4.0", "distance between the two clusters of class 1"},
      {"graphclass.std", "0.5", "cluster standard deviation"},
      {"cooccur.vertices", "8", "vertices per sample"},
      {"cooccur.groups", "2", "coupling blocks"},
      {"cooccur.within", "0.6", "coupling inside a block"},
      {"cooccur.between", "-0.3", "coupling across blocks"},
      {"cooccur.field", "0.0", "external field on every spin"},
      {"cooccur.sweeps", "50", "Gibbs sweeps per sample"},
      {"cooccur.dim", "4", "feature dimension"},
      {"cooccur.noise", "1.0", "std of the feature noise"},
      {"links.vertices", "20", "points per geometric graph"},
      {"links.c", "4", "knn neighbours defining the candidate edges"},
      {"input.kind", "graph", "graph | vector_set (vector_set reads sample vertices as the input vectors)"},
      {"gd.rule", "provided", "basic adjacency for vector sets: provided | full | knn_l1 | knn_l2 | knn_mah"},
      {"gd.c", "3", "neighbours of knn basic adjacency rules"},
      {"backbone.d", "4", "context depth D"},
      {"backbone.gcn_layers", "2", "GCN layers of the context encoder"},
      {"pipeline.ablation", "", "baseline | ttp | mefg | ttp_mefg; overrides ttp.enabled and mefg.enabled"},
      {"ttp.enabled", "false", "task-specific topology prediction"},
      {"ttp.theta", "0.5", "probability threshold"},
      {"ttp.c", "3", "nearest neighbours of the vector-set topology"},
      {"ttp.straight_through", "true", "weight selected edges by their probability"},
      {"ttp.phase1_epochs", "auto", "vector-set pretraining phase 1 epochs; auto is half of train.epochs"},
      {"mefg.enabled", "false", "multi-dimensional edge features"},
      {"mefg.d_model", "0", "attention width; 0 uses the context token dimension"},
      {"vfe.k", "8", "vertex dimension produced by the vector-set extractors"},
      {"gnn.kind", "gated", "gated | gat"},
      {"gnn.layers", "auto", "message-passing layers; auto is 4, or 3 for link tasks"},
      {"gnn.link_mode", "vertices_edge", "vertices | edge | vertices_edge"},
      {"gnn.residual", "true", "add the layer input to each layer output"},
      {"head.hidden", "32", "hidden width of the readout MLP"},
      {"train.epochs", "20", "training epochs"},
      {"train.batch_size", "16", "samples per optimizer step"},
      {"train.lr", "0.01", "initial learning rate"},
      {"train.lr_min", "0.0001", "final learning rate of the cosine schedule"},
      {"train.weight_decay", "0.0", "decoupled weight decay"},
      {"train.class_weighting", "false", "inverse-frequency class weights in the loss"},
      {"eval.hits_k", "10", "k of Hits@k for binary link tasks"},
      {"gradcheck.vertices", "6", "vertices of the gradient-check sample"},
      {"gradcheck.eps", "1e-5", "central-difference step"},
      {"gradcheck.tolerance", "1e-4", "maximum accepted relative error"},
  };
  return keys;
}

RunConfig::RunConfig() {
  for (const auto& k : schema()) {
    values_[k.key] = k.default_value;
    explicit_[k.key] = false;
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("{}:{}: expected key = value", origin, no));
    const auto key = trim(line.substr(0, eq));
    try {
      c.set(key, trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", origin, no, e.what()));
    }
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open config '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!values_.contains(key)) throw ConfigError(fmt::format("unknown key '{}'", key));
  values_[key] = value;
  explicit_[key] = true;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(fmt::format("unknown key '{}'", key));
  return it->second;
}

bool RunConfig::is_default(const std::string& key) const {
  get(key);
  return !explicit_.at(key);
}

double RunConfig::get_double(const std::string& key) const {
  const auto& v = get(key);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(fmt::format("key '{}': '{}' is not a number", key, v));
  }
  return out;
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
  const auto& v = get(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(fmt::format("key '{}': '{}' is not a non-negative integer", key, v));
  }
  return out;
}

bool RunConfig::get_bool(const std::string& key) const {
  const auto& v = get(key);
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError(fmt::format("key '{}': '{}' is not a boolean", key, v));
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& k : schema()) out += fmt::format("{} = {}\n", k.key, values_.at(k.key));
  return out;
}

Family family(const RunConfig& c) {
  const auto& f = c.get("task.family");
  if (f == "sbm") return Family::Sbm;
  if (f == "graphclass") return Family::GraphClass;
  if (f == "cooccur") return Family::CoOccur;
  if (f == "links") return Family::Links;
  throw ConfigError(fmt::format("key 'task.family': unknown family '{}'", f));
}

std::string to_string(Family f) {
  switch (f) {
    case Family::Sbm: return "sbm";
    case Family::GraphClass: return "graphclass";
    case Family::CoOccur: return "cooccur";
    case Family::Links: return "links";
  }
  return "?";
}

std::uint64_t seed(const RunConfig& c) { return c.get_uint("seed"); }

std::size_t classes(const RunConfig& c) {
  if (c.get("task.classes") != "auto") {
    const auto n = c.get_uint("task.classes");
    if (n < 2) throw ConfigError("key 'task.classes': need at least 2 classes");
    return n;
  }
  switch (family(c)) {
    case Family::Sbm: return c.get_uint("sbm.communities");
    case Family::GraphClass: return 2;
    case Family::CoOccur: return 4;
    case Family::Links: return 2;
  }
  return 2;
}

TaskKind task_kind(const RunConfig& c) {
  switch (family(c)) {
    case Family::Sbm: return TaskKind::VertexClass;
    case Family::GraphClass: return TaskKind::GraphClass;
    case Family::CoOccur:
    case Family::Links: return TaskKind::LinkClass;
  }
  return TaskKind::VertexClass;
}

datagen::SbmConfig sbm(const RunConfig& c, std::size_t n, std::uint64_t s) {
  return {.n_vertices = c.get_uint("sbm.vertices"),
          .n_communities = c.get_uint("sbm.communities"),
          .p_in = c.get_double("sbm.p_in"),
          .p_out = c.get_double("sbm.p_out"),
          .feature_noise = c.get_double("sbm.noise"),
          .n_samples = n,
          .seed = s};
}

datagen::GraphClassConfig graph_class(const RunConfig& c, std::size_t n, std::uint64_t s) {
  return {.n_vertices = c.get_uint("graphclass.vertices"),
          .feature_dim = c.get_uint("graphclass.dim"),
          .knn_c = c.get_uint("graphclass.c"),
          .separation = c.get_double("graphclass.separation"),
          .cluster_std = c.get_double("graphclass.std"),
          .n_samples = n,
          .seed = s};
}

datagen::CoOccurConfig cooccur(const RunConfig& c, std::size_t n, std::uint64_t s) {
  const std::size_t nv = c.get_uint("cooccur.vertices");
  return {.n_vertices = nv,
          .coupling = datagen::block_coupling(nv, c.get_uint("cooccur.groups"), c.get_double("cooccur.within"),
                                              c.get_double("cooccur.between")),
          .field = c.get_double("cooccur.field"),
          .gibbs_sweeps = c.get_uint("cooccur.sweeps"),
          .feature_dim = c.get_uint("cooccur.dim"),
          .feature_noise = c.get_double("cooccur.noise"),
          .n_samples = n,
          .seed = s};
}

datagen::BinaryLinksConfig links(const RunConfig& c, std::size_t n, std::uint64_t s) {
  return {.n_vertices = c.get_uint("links.vertices"), .knn_c = c.get_uint("links.c"), .n_samples = n, .seed = s};
}

Splits generate(const RunConfig& c) {
  const std::size_t n_train = c.get_uint("data.n_train"), n_test = c.get_uint("data.n_test");
  const std::size_t n = n_train + n_test;
  const auto s = seed(c);
  std::vector<GraphSample> all;
  switch (family(c)) {
    case Family::Sbm: all = datagen::gen_sbm(sbm(c, n, s)); break;
    case Family::GraphClass: all = datagen::gen_graph_class(graph_class(c, n, s)); break;
    case Family::CoOccur: all = datagen::gen_cooccur_links(cooccur(c, n, s)); break;
    case Family::Links: all = datagen::gen_binary_links(links(c, n, s)); break;
  }
  Splits out;
  out.train.assign(std::make_move_iterator(all.begin()),
                   std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(n_train)));
  out.test.assign(std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(n_train)),
                  std::make_move_iterator(all.end()));
  return out;
}

pipeline::PipelineConfig pipeline_config(const RunConfig& c) {
  pipeline::PipelineConfig p;
  p.input_kind = pipeline::parse_input_kind(c.get("input.kind"));
  const bool knn_rule = c.get("gd.rule").starts_with("knn");
  p.rule = gd::AdjacencyRule::parse(c.get("gd.rule"),
                                    knn_rule ? std::optional<std::size_t>(c.get_uint("gd.c")) : std::nullopt);
  p.ttp = c.get_bool("ttp.enabled");
  p.mefg = c.get_bool("mefg.enabled");
  if (!c.get("pipeline.ablation").empty()) {
    const auto a = pipeline::parse_ablation(c.get("pipeline.ablation"));
    pipeline::PipelineConfig probe;
    probe.set_ablation(a);
    if ((!c.is_default("ttp.enabled") && probe.ttp != p.ttp) || (!c.is_default("mefg.enabled") && probe.mefg != p.mefg)) {
      throw ConfigError("key 'pipeline.ablation' contradicts ttp.enabled or mefg.enabled");
    }
    p.set_ablation(a);
  }
  p.theta = c.get_double("ttp.theta");
  if (!(p.theta >= 0.0 && p.theta <= 1.0)) throw ConfigError("key 'ttp.theta': must lie in [0, 1]");
  p.ttp_c = c.get_uint("ttp.c");
  p.straight_through = c.get_bool("ttp.straight_through");
  p.d_ctx = c.get_uint("backbone.d");
  if (p.d_ctx == 0) throw ConfigError("key 'backbone.d': must be positive");
  p.backbone_gcn_layers = c.get_uint("backbone.gcn_layers");
  p.d_model = c.get_uint("mefg.d_model");
  p.vfe_k = c.get_uint("vfe.k");
  p.gnn_kind = gnn::parse_layer_kind(c.get("gnn.kind"));
  const auto task = task_kind(c);
  p.gnn_layers = c.get("gnn.layers") == "auto" ? (task == TaskKind::LinkClass ? 3 : 4) : c.get_uint("gnn.layers");
  p.residual = c.get_bool("gnn.residual");
  p.head.task = task;
  p.head.link_mode = gnn::parse_link_mode(c.get("gnn.link_mode"));
  p.head.hidden = c.get_uint("head.hidden");
  p.head.classes = classes(c);
  return p;
}

train::TrainConfig train_config(const RunConfig& c) {
  train::TrainConfig t;
  t.epochs = c.get_uint("train.epochs");
  t.batch_size = c.get_uint("train.batch_size");
  if (t.batch_size == 0) throw ConfigError("key 'train.batch_size': must be positive");
  t.lr = c.get_double("train.lr");
  t.lr_min = c.get_double("train.lr_min");
  t.weight_decay = c.get_double("train.weight_decay");
  t.class_weighting = c.get_bool("train.class_weighting");
  t.seed = seed(c);
  return t;
}

std::size_t phase1_epochs(const RunConfig& c) {
  const std::size_t e = c.get_uint("train.epochs");
  if (c.get("ttp.phase1_epochs") == "auto") return e / 2;
  return c.get_uint("ttp.phase1_epochs");
}

std::optional<std::size_t> hits_k(const RunConfig& c) {
  const auto k = c.get_uint("eval.hits_k");
  if (k == 0) return std::nullopt;
  return k;
}

}  // namespace gratis::config
