#pragma once

// Training, evaluation and gradient-check drivers shared by the CLI and tests.

#include <optional>
#include <span>

#include "gratis/config.hpp"
#include "gratis/gradcheck.hpp"
#include "gratis/pipeline.hpp"
#include "gratis/training.hpp"

namespace gratis::runner {

struct TrainOutcome {
  pipeline::TwoPhaseResult pretrain;  // empty unless the model has a pretraining stage
  std::vector<double> loss;
};

/// Two-phase pretraining when the model has one, then `cfg.epochs` epochs of
/// the full pipeline driven by `optim`.
TrainOutcome train_model(pipeline::GratisModel& model, train::AdamW& optim, std::span<const GraphSample> data,
                         const train::TrainConfig& cfg, std::size_t phase1_epochs, train::MetricLog* log = nullptr);

train::MetricReport evaluate_model(const pipeline::GratisModel& model, std::span<const GraphSample> data,
                                   std::optional<std::size_t> hits_k);

/// Writes accuracy, macro F1, UAR and Hits@k (if present) to the log.
void log_report(train::MetricLog& log, std::size_t epoch, const std::string& split, const train::MetricReport& r);

/// The seeded sample checked by gradcheck: random features of dimension 3,
/// random adjacency and binary vertex labels.
GraphSample gradcheck_sample(std::size_t n_vertices, std::uint64_t seed);

/// Finite-difference check of every parameter of the full graph pipeline
/// (backbone, straight-through topology prediction, edge features, two
/// message-passing layers of the configured kind, head).
GradCheckReport gradcheck_pipeline(const config::RunConfig& c);

}  // namespace gratis::runner
