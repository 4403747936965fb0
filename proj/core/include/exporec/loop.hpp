#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "exporec/logging.hpp"
#include "exporec/metrics.hpp"
#include "exporec/model.hpp"
#include "exporec/scoring.hpp"
#include "exporec/world.hpp"

namespace exporec {

struct ExperimentConfig {
  WorldConfig world;
  TrainConfig train;
  ScoringConfig scoring;
  std::size_t rounds = 6;
  std::size_t slate_size = 20;
  double exploration_epsilon = 0.15;
  std::vector<double> gamma_grid = {0.0, 0.25, 0.5, 0.65, 0.75, 1.0};
  std::size_t holdout_rounds = 1;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  double top_fraction = 0.10;
  double propensity_clip = 0.01;

  void validate() const;
};

struct SweepCell {
  double gamma;
  std::uint64_t seed;
  MetricsReport report;
  std::uint64_t model_fingerprint;
};

struct MetricAggregate {
  double gamma;
  double positive_recall_mean = 0, positive_recall_sd = 0;
  double negative_recall_mean = 0, negative_recall_sd = 0;
  double unique_retrieved_mean = 0, unique_retrieved_sd = 0;
  double popular_dominance_mean = 0, popular_dominance_sd = 0;
  double exposure_gini_mean = 0, exposure_gini_sd = 0;
};

struct SweepResult {
  std::vector<SweepCell> cells;                       // one per (gamma, seed)
  std::vector<SweepCell> opc;                         // one per seed, gamma forced to 0
  std::map<std::uint64_t, double> exposure_spearman;  // per seed, exposure-head fidelity
  std::vector<MetricAggregate> aggregates;            // per gamma, over seeds
  MetricAggregate opc_aggregate;
};

// One trained model per seed, every gamma evaluated at inference time only;
// the model fingerprint recorded per cell proves no retraining happened.
SweepResult run_static_sweep(const ExperimentConfig& config);

// Same sweep against externally supplied logs: the final holdout_rounds
// present in the file become the evaluation set, the rest train the model.
SweepResult run_sweep_on_logs(const ExperimentConfig& config,
                              const std::vector<ImpressionRecord>& logs);

struct SelectionRule {
  enum class Kind { MaxPositive, ConstrainedPositive, Scalarized };
  Kind kind = Kind::MaxPositive;
  double beta = 0.0;    // ConstrainedPositive: mean negative recall cap
  double lambda = 0.0;  // Scalarized: penalty on negative recall
};

struct GammaChoice {
  double gamma;
  MetricAggregate aggregate;
};

// Picks gamma from the sweep aggregates; ties break toward the smaller gamma.
GammaChoice grid_search_gamma(const SweepResult& sweep, const SelectionRule& rule);

struct RoundTrace {
  std::uint32_t round = 0;
  double exposure_gini = 0.0;  // cumulative through this round
  bool has_model = false;      // round 0 is bootstrap-only
  double positive_recall = 0.0;
  double negative_recall = 0.0;
  std::size_t unique_retrieved = 0;
  double popular_dominance = 0.0;
};

struct ClosedLoopResult {
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<RoundTrace>> traces;               // per seed
  std::vector<std::vector<ImpressionRecord>> logs_per_seed;  // full logs, replayable
};

// Log -> retrain -> serve each round at the given gamma; each round's fresh
// logs are the rolling holdout its serving model is scored against.
ClosedLoopResult run_closed_loop(const ExperimentConfig& config, double gamma);

}  // namespace exporec
