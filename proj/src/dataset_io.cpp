// Line-delimited dataset records. Writing is done by hand so every float goes
// out with exactly 17 significant digits; parsing goes through nlohmann/json.

#include <cmath>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <json.hpp>

#include "gratis/error.hpp"
#include "gratis/graph.hpp"

namespace gratis {
namespace {

using nlohmann::json;

void append_floats(std::string& out, std::span<const double> values) {
  out += '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    // "-0" would come back as the integer 0
    if (values[i] == 0.0 && std::signbit(values[i])) out += "-0.0";
    else fmt::format_to(std::back_inserter(out), "{:.17g}", values[i]);
  }
  out += ']';
}

[[noreturn]] void fail(std::size_t line, std::string_view field, std::string_view why) {
  throw IoError(fmt::format("line {}: field '{}': {}", line, field, why));
}

const json& field(const json& obj, const char* name, std::size_t line) {
  auto it = obj.find(name);
  if (it == obj.end()) fail(line, name, "missing");
  return *it;
}

std::size_t as_index(const json& v, std::string_view name, std::size_t line) {
  if (!v.is_number_integer() && !v.is_number_unsigned()) fail(line, name, "expected a non-negative integer");
  if (v.is_number_integer() && v.get<std::int64_t>() < 0) fail(line, name, "expected a non-negative integer");
  return v.get<std::size_t>();
}

std::vector<double> as_floats(const json& v, std::string_view name, std::size_t expected,
                              std::size_t line) {
  if (!v.is_array()) fail(line, name, "expected a list of numbers");
  if (v.size() != expected) {
    fail(line, name, fmt::format("expected {} values, got {}", expected, v.size()));
  }
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) fail(line, name, "non-numeric entry");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

std::string encode_record(const GraphSample& g) {
  std::string out;
  fmt::format_to(std::back_inserter(out), R"({{"n":{},"k":{},"vertices":)", g.n_vertices, g.vertex_dim);
  append_floats(out, g.vertices.data());
  out += R"(,"adjacency":[)";
  auto adj = g.adjacency.data();
  for (std::size_t i = 0; i < adj.size(); ++i) {
    if (i) out += ',';
    out += adj[i] != 0.0 ? '1' : '0';
  }
  fmt::format_to(std::back_inserter(out), R"(],"edge_dim":{},"edges":[)", g.edges.edge_dim());
  bool first = true;
  for (const auto& [key, feat] : g.edges.entries()) {
    if (!first) out += ',';
    first = false;
    fmt::format_to(std::back_inserter(out), "[{},{},", key.i, key.j);
    append_floats(out, feat);
    out += ']';
  }
  out += R"(],"labels":{"kind":")";
  out += to_string(g.labels.kind);
  out += '"';
  if (g.labels.graph_label) {
    fmt::format_to(std::back_inserter(out), R"(,"graph_label":{})", *g.labels.graph_label);
  }
  if (g.labels.vertex_labels) {
    out += R"(,"vertex_labels":[)";
    const auto& vl = *g.labels.vertex_labels;
    for (std::size_t i = 0; i < vl.size(); ++i) fmt::format_to(std::back_inserter(out), "{}{}", i ? "," : "", vl[i]);
    out += ']';
  }
  if (g.labels.link_labels) {
    out += R"(,"link_labels":[)";
    bool f = true;
    for (const auto& [key, c] : *g.labels.link_labels) {
      fmt::format_to(std::back_inserter(out), "{}[{},{},{}]", f ? "" : ",", key.i, key.j, c);
      f = false;
    }
    out += ']';
  }
  out += "}}";
  return out;
}

GraphSample decode_record(const std::string& text, std::size_t line) {
  json rec;
  try {
    rec = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(fmt::format("line {}: malformed record ({})", line, e.what()));
  }
  if (!rec.is_object()) throw IoError(fmt::format("line {}: record is not an object", line));

  GraphSample g;
  g.n_vertices = as_index(field(rec, "n", line), "n", line);
  g.vertex_dim = as_index(field(rec, "k", line), "k", line);
  if (g.n_vertices == 0) fail(line, "n", "must be positive");
  if (g.vertex_dim == 0) fail(line, "k", "must be positive");
  const std::size_t n = g.n_vertices, k = g.vertex_dim;
  g.vertices = Tensor::from({n, k}, as_floats(field(rec, "vertices", line), "vertices", n * k, line));
  g.adjacency = Tensor::from({n, n}, as_floats(field(rec, "adjacency", line), "adjacency", n * n, line));

  const std::size_t edim = as_index(field(rec, "edge_dim", line), "edge_dim", line);
  if (edim == 0) fail(line, "edge_dim", "must be positive");
  g.edges = EdgeFeatureStore(edim);
  const auto& edges = field(rec, "edges", line);
  if (!edges.is_array()) fail(line, "edges", "expected a list");
  for (const auto& e : edges) {
    if (!e.is_array() || e.size() != 3) fail(line, "edges", "each edge must be [i, j, features]");
    const std::size_t i = as_index(e[0], "edges", line), j = as_index(e[1], "edges", line);
    g.edges.set({i, j}, as_floats(e[2], "edges", edim, line));
  }

  const auto& labels = field(rec, "labels", line);
  if (!labels.is_object()) fail(line, "labels", "expected an object");
  const auto& kind = field(labels, "kind", line);
  if (!kind.is_string()) fail(line, "labels.kind", "expected a string");
  const auto ks = kind.get<std::string>();
  if (ks == "graph") {
    g.labels = TaskLabels::graph(as_index(field(labels, "graph_label", line), "labels.graph_label", line));
  } else if (ks == "vertex") {
    const auto& vl = field(labels, "vertex_labels", line);
    if (!vl.is_array()) fail(line, "labels.vertex_labels", "expected a list");
    std::vector<std::size_t> out;
    for (const auto& x : vl) out.push_back(as_index(x, "labels.vertex_labels", line));
    g.labels = TaskLabels::vertex(std::move(out));
  } else if (ks == "link") {
    const auto& ll = field(labels, "link_labels", line);
    if (!ll.is_array()) fail(line, "labels.link_labels", "expected a list");
    std::map<EdgeKey, std::size_t> out;
    for (const auto& x : ll) {
      if (!x.is_array() || x.size() != 3) fail(line, "labels.link_labels", "each entry must be [i, j, class]");
      out[{as_index(x[0], "labels.link_labels", line), as_index(x[1], "labels.link_labels", line)}] =
          as_index(x[2], "labels.link_labels", line);
    }
    g.labels = TaskLabels::link(std::move(out));
  } else {
    fail(line, "labels.kind", "unknown kind '" + ks + "'");
  }
  return g;
}

void write_dataset(std::span<const GraphSample> samples, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& g : samples) os << encode_record(g) << '\n';
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<GraphSample> read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::vector<GraphSample> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(is, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(decode_record(text, line));
  }
  return out;
}

}  // namespace gratis
