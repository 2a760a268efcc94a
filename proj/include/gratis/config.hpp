#pragma once

// Plain-text `key = value` run configuration. `#` starts a comment. Every key
// has a default; unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gratis/datagen.hpp"
#include "gratis/pipeline.hpp"
#include "gratis/training.hpp"

namespace gratis::config {

struct KeyInfo {
  std::string key;
  std::string default_value;
  std::string doc;
};

/// The full schema in documentation order.
const std::vector<KeyInfo>& schema();

class RunConfig {
 public:
  RunConfig();  // all defaults

  static RunConfig parse(const std::string& text, const std::string& origin = "<config>");
  static RunConfig load(const std::filesystem::path& path);

  /// Throws ConfigError for unknown keys.
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool is_default(const std::string& key) const;

  std::string get_string(const std::string& key) const { return get(key); }
  double get_double(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  bool get_bool(const std::string& key) const;

  /// Every key with its effective value, one `key = value` per line.
  std::string dump() const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicit_;
};

enum class Family { Sbm, GraphClass, CoOccur, Links };
Family family(const RunConfig& c);
std::string to_string(Family f);

std::uint64_t seed(const RunConfig& c);
std::size_t classes(const RunConfig& c);
TaskKind task_kind(const RunConfig& c);

datagen::SbmConfig sbm(const RunConfig& c, std::size_t n, std::uint64_t seed);
datagen::GraphClassConfig graph_class(const RunConfig& c, std::size_t n, std::uint64_t seed);
datagen::CoOccurConfig cooccur(const RunConfig& c, std::size_t n, std::uint64_t seed);
datagen::BinaryLinksConfig links(const RunConfig& c, std::size_t n, std::uint64_t seed);

/// Train and test splits of the configured family (data.n_train, data.n_test).
struct Splits {
  std::vector<GraphSample> train, test;
};
Splits generate(const RunConfig& c);

pipeline::PipelineConfig pipeline_config(const RunConfig& c);
train::TrainConfig train_config(const RunConfig& c);
/// Phase-1 epochs of the two-phase schedule (default half of train.epochs).
std::size_t phase1_epochs(const RunConfig& c);
std::optional<std::size_t> hits_k(const RunConfig& c);

}  // namespace gratis::config
