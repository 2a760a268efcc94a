#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gratis/graph.hpp"
#include "gratis/params.hpp"

namespace gratis::train {

/// Mean of -log softmax(logits)[y], each row weighted by class_weights[y]
/// when given and normalized by the total weight.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels,
                     std::span<const double> class_weights = {});

/// w_c = total / (C · count_c); classes that never occur get weight 1.
std::vector<double> inverse_frequency_weights(std::span<const std::size_t> labels, std::size_t classes);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

class AdamW {
 public:
  AdamW(std::vector<Parameter> params, AdamWConfig cfg);

  /// One update from the parameters' accumulated gradients.
  void step(double lr);
  void zero_grad();

  std::span<const Parameter> params() const { return params_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  std::uint64_t step_count() const { return step_; }
  void restore(std::vector<std::vector<double>> m, std::vector<std::vector<double>> v, std::uint64_t step);

 private:
  std::vector<Parameter> params_;
  AdamWConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t step_ = 0;
};

/// lr_min + (lr0 - lr_min)·(1 + cos(π·step/total))/2, clamped to the last step.
double cosine_lr(std::uint64_t step, std::uint64_t total, double lr0, double lr_min);

// ---- checkpoints ----

/// Writes every parameter and, if given, the optimizer moments and step.
void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store,
                     const AdamW* optim = nullptr);
/// Loads values into the already-registered parameters (names and shapes must
/// match). Optimizer state is restored when `optim` is non-null.
void load_checkpoint(const std::filesystem::path& path, ParameterStore& store, AdamW* optim = nullptr);

// ---- metrics ----

double accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels);
/// Binary F1 of `positive_class`; 0 when precision + recall = 0.
double metric_f1(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                 std::size_t positive_class);
/// Per-class F1 averaged over the classes present in the labels.
double macro_f1(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                std::size_t n_classes);
/// Per-class recalls; classes absent from the labels are NaN.
std::vector<double> class_recalls(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                                  std::size_t n_classes);
/// Mean recall over the classes present in the labels.
double metric_uar(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                  std::size_t n_classes);
/// Fraction of positives scoring strictly above the k-th highest negative.
double metric_hits_at_k(std::span<const double> pos_scores, std::span<const double> neg_scores,
                        std::size_t k);

struct MetricReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double uar = 0.0;
  std::optional<double> hits_at_k;
  std::vector<double> recalls;
};

// ---- training loop ----

/// Logits for one sample, rows aligned with sample_targets().
using ForwardFn = std::function<Tensor(const GraphSample&)>;

/// Labels in logit-row order: one graph label, N vertex labels, or the link
/// labels in sorted pair order.
std::vector<std::size_t> sample_targets(const GraphSample& g);
/// The labelled pairs of a link sample in sorted order; empty otherwise.
std::vector<EdgeKey> link_queries(const GraphSample& g);

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 16;
  double lr = 0.01;
  double lr_min = 1e-4;
  double weight_decay = 0.0;
  bool class_weighting = false;
  std::uint64_t seed = 0;
};

/// `epoch, split, metric, value` lines.
class MetricLog {
 public:
  explicit MetricLog(std::ostream* out = nullptr) : out_(out) {}
  void record(std::size_t epoch, const std::string& split, const std::string& metric, double value);
  const std::vector<std::string>& lines() const { return lines_; }

 private:
  std::ostream* out_;
  std::vector<std::string> lines_;
};

/// Minibatch training with gradient accumulation and a cosine schedule over
/// all steps. Returns the mean training loss per epoch.
std::vector<double> fit(const ForwardFn& forward, AdamW& optim, std::span<const GraphSample> data,
                        const TrainConfig& cfg, std::size_t classes, MetricLog* log = nullptr,
                        const std::string& split = "train");

struct Prediction {
  std::vector<std::size_t> preds;
  std::vector<std::size_t> labels;
  std::vector<double> positive_scores;  // logit(1) - logit(0) for binary tasks
};

Prediction predict(const ForwardFn& forward, std::span<const GraphSample> data);
MetricReport evaluate(const Prediction& p, std::size_t classes, std::optional<std::size_t> hits_k);

}  // namespace gratis::train
