// gratis: generate data, train, evaluate, enhance and gradient-check.
//
// Exit codes: 0 success, 1 validation or configuration failure, 2 I/O failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gratis/config.hpp"
#include "gratis/error.hpp"
#include "gratis/kernels.hpp"
#include "gratis/runner.hpp"

namespace fs = std::filesystem;
using namespace gratis;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string checkpoint;
  std::string input;
};

config::RunConfig load_config(const Options& o) {
  auto c = o.config.empty() ? config::RunConfig() : config::RunConfig::load(o.config);
  if (o.seed) c.set("seed", std::to_string(*o.seed));
  return c;
}

fs::path data_path(const config::RunConfig& c, const Options& o, const std::string& key, const char* fallback) {
  const auto& v = c.get(key);
  return v.empty() ? fs::path(o.out) / fallback : fs::path(v);
}

fs::path checkpoint_path(const Options& o) {
  return o.checkpoint.empty() ? fs::path(o.out) / "model.ckpt" : fs::path(o.checkpoint);
}

void ensure_out(const Options& o) {
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw IoError(fmt::format("cannot create output directory '{}': {}", o.out, ec.message()));
}

int cmd_gen(const Options& o) {
  const auto c = load_config(o);
  ensure_out(o);
  const auto splits = config::generate(c);
  const auto train_path = data_path(c, o, "data.train", "train.jsonl");
  const auto test_path = data_path(c, o, "data.test", "test.jsonl");
  write_dataset(splits.train, train_path);
  write_dataset(splits.test, test_path);
  fmt::print("wrote {} training samples to {}\n", splits.train.size(), train_path.string());
  fmt::print("wrote {} test samples to {}\n", splits.test.size(), test_path.string());
  return 0;
}

int cmd_train(const Options& o) {
  const auto c = load_config(o);
  ensure_out(o);
  const auto train_data = read_dataset(data_path(c, o, "data.train", "train.jsonl"));
  const auto test_path = data_path(c, o, "data.test", "test.jsonl");
  const auto pcfg = config::pipeline_config(c);
  const auto tcfg = config::train_config(c);
  pipeline::GratisModel model(pcfg, pipeline::dims_of(train_data), config::seed(c));
  train::AdamW optim(model.pipeline_parameters(), {.weight_decay = tcfg.weight_decay});

  const auto log_path = fs::path(o.out) / "metrics.log";
  std::ofstream log_file(log_path, std::ios::trunc);
  if (!log_file) throw IoError(fmt::format("cannot open '{}' for writing", log_path.string()));
  train::MetricLog log(&log_file);
  runner::train_model(model, optim, train_data, tcfg, config::phase1_epochs(c), &log);

  const auto k = config::hits_k(c);
  runner::log_report(log, tcfg.epochs, "train", runner::evaluate_model(model, train_data, k));
  if (fs::exists(test_path)) {
    const auto test_data = read_dataset(test_path);
    const auto report = runner::evaluate_model(model, test_data, k);
    runner::log_report(log, tcfg.epochs, "test", report);
    fmt::print("test accuracy {:.4f}  macro F1 {:.4f}  UAR {:.4f}\n", report.accuracy, report.macro_f1, report.uar);
  }
  train::save_checkpoint(checkpoint_path(o), model.store(), &optim);
  fmt::print("checkpoint {}\nmetrics {}\n", checkpoint_path(o).string(), log_path.string());
  return 0;
}

pipeline::GratisModel restore(const config::RunConfig& c, const Options& o, std::span<const GraphSample> data) {
  pipeline::GratisModel model(config::pipeline_config(c), pipeline::dims_of(data), config::seed(c));
  train::load_checkpoint(checkpoint_path(o), model.store());
  return model;
}

int cmd_eval(const Options& o) {
  const auto c = load_config(o);
  const auto data = read_dataset(o.input.empty() ? data_path(c, o, "data.test", "test.jsonl") : fs::path(o.input));
  const auto model = restore(c, o, data);
  const auto r = runner::evaluate_model(model, data, config::hits_k(c));
  train::MetricLog log(&std::cout);
  runner::log_report(log, c.get_uint("train.epochs"), "eval", r);
  return 0;
}

int cmd_enhance(const Options& o) {
  const auto c = load_config(o);
  ensure_out(o);
  const auto data = read_dataset(o.input.empty() ? data_path(c, o, "data.test", "test.jsonl") : fs::path(o.input));
  const auto model = restore(c, o, data);
  std::vector<GraphSample> out;
  out.reserve(data.size());
  for (std::size_t s = 0; s < data.size(); ++s) {
    out.push_back(model.enhance(data[s]));
    const auto problems = validate(out.back());
    if (!problems.empty()) throw ContractError(fmt::format("enhanced sample {}: {}", s, problems.front()));
  }
  const auto path = fs::path(o.out) / "enhanced.jsonl";
  write_dataset(out, path);
  fmt::print("wrote {} enhanced samples ({}, edge dimension {}) to {}\n", out.size(),
             pipeline::to_string(model.config().ablation()), out.empty() ? 0 : out.front().edges.edge_dim(),
             path.string());
  return 0;
}

int cmd_gradcheck(const Options& o) {
  const auto c = load_config(o);
  const auto report = runner::gradcheck_pipeline(c);
  for (const auto& e : report.entries) {
    fmt::print("{:<24} {:>6} elements  max rel error {:.3e}  (analytic {:.6e}, numeric {:.6e})\n", e.name, e.elements, e.max_rel_error, e.worst_analytic, e.worst_numeric);
  }
  const double tol = c.get_double("gradcheck.tolerance");
  const bool ok = !report.has_nan() && report.max_rel_error() <= tol;
  fmt::print("max relative error {:.3e} over {} elements (tolerance {:.1e}): {}\n", report.max_rel_error(),
             report.elements(), tol, ok ? "ok" : "FAILED");
  return ok ? 0 : 1;
}

int cmd_defaults() {
  for (const auto& k : config::schema()) fmt::print("{} = {}    # {}\n", k.key, k.default_value, k.doc);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  kernels::configure_threads_from_env();
  CLI::App app{"Task-specific graph representations for graph and vector-set tasks"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "override the configured seed");
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
  };
  auto* gen = app.add_subcommand("gen", "generate train/test datasets");
  auto* train_cmd = app.add_subcommand("train", "train and write a checkpoint plus metric log");
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test dataset");
  auto* enhance = app.add_subcommand("enhance", "write the enhanced graphs of a dataset");
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the full pipeline");
  auto* defaults = app.add_subcommand("defaults", "print every configuration key with its default");
  for (auto* sub : {gen, train_cmd, eval, enhance, gradcheck}) common(sub);
  for (auto* sub : {train_cmd, eval, enhance}) {
    sub->add_option("--checkpoint", o.checkpoint, "checkpoint path (default <out>/model.ckpt)");
  }
  for (auto* sub : {eval, enhance}) sub->add_option("--input", o.input, "dataset to read (default data.test)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  try {
    if (*gen) return cmd_gen(o);
    if (*train_cmd) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*enhance) return cmd_enhance(o);
    if (*gradcheck) return cmd_gradcheck(o);
    if (*defaults) return cmd_defaults();
  } catch (const IoError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 1;
}
