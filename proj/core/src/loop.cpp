#include "exporec/loop.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace exporec {

namespace {

// Stream-purpose salts so that one experiment seed yields independent
// world / training / logging randomness.
constexpr std::uint64_t kWorldSalt = 0x77;
constexpr std::uint64_t kTrainSalt = 0xAA;
constexpr std::uint64_t kBootstrapTrainSalt = 0xAB;
constexpr std::uint64_t kLoggingSalt = 0xBB;

std::vector<UserId> all_users(std::size_t n_users) {
  std::vector<UserId> users(n_users);
  std::iota(users.begin(), users.end(), 0);
  return users;
}

std::vector<ImpressionRecord> records_below_round(const std::vector<ImpressionRecord>& logs,
                                                  std::uint32_t round) {
  std::vector<ImpressionRecord> out;
  for (const auto& rec : logs)
    if (rec.round < round) out.push_back(rec);
  return out;
}

ExposureCounts counts_from_logs(const std::vector<ImpressionRecord>& logs,
                                std::size_t n_items) {
  ExposureCounts counts = ExposureCounts::zeros(n_items);
  for (const auto& rec : logs) counts.add(rec.item_id);
  return counts;
}

Retrievals retrieve_for_users(const RetrievalIndex& index, const ModelParams& params,
                              const std::vector<UserId>& users, std::size_t k) {
  Retrievals out;
  for (const UserId u : users) out[u] = retrieve_top_k(index, params, u, k);
  return out;
}

MetricsReport evaluate_model(const ModelParams& params, double gamma, std::size_t k,
                             const EvaluationSet& eval, const ExposureCounts& counts,
                             double top_fraction) {
  const RetrievalIndex index = build_index(params, gamma);
  const std::vector<UserId> users = eval.users();
  if (users.empty()) throw DataError("empty evaluation set: holdout rounds produced no usable users");
  const Retrievals retrievals = retrieve_for_users(index, params, users, k);

  MetricsReport report;
  report.positive_recall_at_k = positive_recall_at_k(retrievals, eval);
  report.negative_recall_at_k = negative_recall_at_k(retrievals, eval);
  report.unique_retrieved = unique_retrieved_items(retrievals);
  report.popular_dominance = popular_dominance(retrievals, counts, top_fraction);
  report.exposure_gini = exposure_gini(counts);
  report.k = k;
  report.gamma = gamma;
  report.n_eval_users = users.size();
  return report;
}

// Per-item mean predicted exposure probability over the given users,
// rank-correlated with empirical exposure counts.
double exposure_head_spearman(const ModelParams& params, const std::vector<UserId>& users,
                              const ExposureCounts& counts) {
  std::vector<double> predicted(params.n_items, 0.0);
  for (const UserId u : users) {
    const auto ux = params.user_exp.row(u);
    for (std::size_t v = 0; v < params.n_items; ++v) {
      predicted[v] +=
          sigmoid(dot(ux, params.item_exp.row(v)) + params.item_exp_bias[v]);
    }
  }
  for (double& p : predicted) p /= static_cast<double>(users.size());
  std::vector<double> empirical(counts.counts.begin(), counts.counts.end());
  return spearman(predicted, empirical);
}

double sd_of(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double acc = 0.0;
  for (const double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

MetricAggregate aggregate_cells(double gamma, const std::vector<const MetricsReport*>& reports) {
  MetricAggregate agg;
  agg.gamma = gamma;
  std::vector<double> pos, neg, uni, dom, gini;
  for (const auto* r : reports) {
    pos.push_back(r->positive_recall_at_k);
    neg.push_back(r->negative_recall_at_k);
    uni.push_back(static_cast<double>(r->unique_retrieved));
    dom.push_back(r->popular_dominance);
    gini.push_back(r->exposure_gini);
  }
  const auto mean = [](const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  };
  agg.positive_recall_mean = mean(pos);
  agg.negative_recall_mean = mean(neg);
  agg.unique_retrieved_mean = mean(uni);
  agg.popular_dominance_mean = mean(dom);
  agg.exposure_gini_mean = mean(gini);
  agg.positive_recall_sd = sd_of(pos, agg.positive_recall_mean);
  agg.negative_recall_sd = sd_of(neg, agg.negative_recall_mean);
  agg.unique_retrieved_sd = sd_of(uni, agg.unique_retrieved_mean);
  agg.popular_dominance_sd = sd_of(dom, agg.popular_dominance_mean);
  agg.exposure_gini_sd = sd_of(gini, agg.exposure_gini_mean);
  return agg;
}

void aggregate_sweep(SweepResult& result, const std::vector<double>& gamma_grid) {
  for (const double gamma : gamma_grid) {
    std::vector<const MetricsReport*> reports;
    for (const auto& cell : result.cells)
      if (cell.gamma == gamma) reports.push_back(&cell.report);
    result.aggregates.push_back(aggregate_cells(gamma, reports));
  }
  if (!result.opc.empty()) {
    std::vector<const MetricsReport*> reports;
    for (const auto& cell : result.opc) reports.push_back(&cell.report);
    result.opc_aggregate = aggregate_cells(0.0, reports);
  }
}

// Trains the final model and the OPC baseline on the training rounds of
// `logs`, evaluates every gamma plus the baseline on the holdout rounds.
// Shared by the simulated sweep and log replay.
void sweep_one_seed(const ExperimentConfig& config, std::uint64_t seed,
                    const std::vector<ImpressionRecord>& logs, SweepResult& result) {
  if (logs.empty()) throw DataError("empty logs for seed " + std::to_string(seed));
  std::uint32_t max_round = 0;
  for (const auto& rec : logs) max_round = std::max(max_round, rec.round);
  const std::size_t total_rounds = max_round + 1;
  if (config.holdout_rounds >= total_rounds)
    throw DataError("holdout_rounds (" + std::to_string(config.holdout_rounds) +
                    ") leaves no training rounds out of " + std::to_string(total_rounds));
  const auto train_rounds = static_cast<std::uint32_t>(total_rounds - config.holdout_rounds);

  const std::vector<ImpressionRecord> train_logs = records_below_round(logs, train_rounds);
  std::vector<ImpressionRecord> holdout_logs;
  for (const auto& rec : logs)
    if (rec.round >= train_rounds) holdout_logs.push_back(rec);

  const std::size_t n_users = config.world.n_users;
  const std::size_t n_items = config.world.n_items;
  const ExposureCounts train_counts = counts_from_logs(train_logs, n_items);
  const ExposureCounts all_counts = counts_from_logs(logs, n_items);
  const EvaluationSet eval = build_evaluation_set(holdout_logs);

  TrainConfig tc = config.train;
  tc.seed = derive_seed(seed, kTrainSalt);
  const TrainOutput trained = train(train_logs, tc, n_users, n_items);
  const std::uint64_t fp = trained.params.fingerprint();

  for (const double gamma : config.gamma_grid) {
    MetricsReport report = evaluate_model(trained.params, gamma, config.scoring.k, eval,
                                          all_counts, config.top_fraction);
    result.cells.push_back({gamma, seed, report, fp});
  }

  const TrainOutput opc =
      train_opc_baseline(train_logs, tc, n_users, n_items, train_counts, config.propensity_clip);
  MetricsReport opc_report = evaluate_model(opc.params, 0.0, config.scoring.k, eval,
                                            all_counts, config.top_fraction);
  result.opc.push_back({0.0, seed, opc_report, opc.params.fingerprint()});

  result.exposure_spearman[seed] =
      exposure_head_spearman(trained.params, eval.users(), all_counts);
}

// rounds 0..n-1 of logging: round 0 under the Zipf bootstrap, later rounds
// under a serving model retrained each round on everything logged so far.
// The serving chain uses its own seed stream so the sweep's evaluation model
// is never byte-identical to the model that served the holdout round.
std::vector<ImpressionRecord> simulate_logs(const ExperimentConfig& config,
                                            std::uint64_t seed, const World& world,
                                            double serving_gamma) {
  const std::vector<UserId> users = all_users(config.world.n_users);
  Rng log_rng(derive_seed(seed, kLoggingSalt));

  LoggingPolicy bootstrap;
  bootstrap.kind = LoggingPolicy::Kind::ZipfBootstrap;
  bootstrap.slate_size = config.slate_size;

  LoggingRoundResult round0 = run_logging_round(world, bootstrap, users, 0, log_rng);
  std::vector<ImpressionRecord> logs = std::move(round0.records);
  ExposureCounts cumulative = std::move(round0.delta);

  for (std::uint32_t round = 1; round < config.rounds; ++round) {
    TrainConfig tc = config.train;
    tc.seed = derive_seed(seed, kBootstrapTrainSalt, round);
    const TrainOutput serving = train(logs, tc, config.world.n_users, config.world.n_items);
    const RetrievalIndex index = build_index(serving.params, serving_gamma);

    LoggingPolicy model_policy;
    model_policy.kind = LoggingPolicy::Kind::ModelTopK;
    model_policy.slate_size = config.slate_size;
    model_policy.exploration_epsilon = config.exploration_epsilon;
    model_policy.index = &index;
    model_policy.params = &serving.params;
    model_policy.cumulative_exposure = &cumulative;

    LoggingRoundResult r = run_logging_round(world, model_policy, users, round, log_rng);
    logs.insert(logs.end(), r.records.begin(), r.records.end());
    cumulative = accumulate_exposures(cumulative, r.delta);
  }
  return logs;
}

}  // namespace

void ExperimentConfig::validate() const {
  world.validate();
  train.validate();
  scoring.validate();
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (slate_size < 1 || slate_size > world.n_items)
    throw ConfigError("slate_size must be in [1, n_items]");
  if (exploration_epsilon < 0.0 || exploration_epsilon > 1.0)
    throw ConfigError("exploration_epsilon must be in [0, 1]");
  if (gamma_grid.empty()) throw ConfigError("gamma_grid must be non-empty");
  if (!std::ranges::is_sorted(gamma_grid)) throw ConfigError("gamma_grid must be sorted ascending");
  for (const double g : gamma_grid)
    if (g < 0.0) throw ConfigError("gamma_grid values must be >= 0");
  if (holdout_rounds < 1) throw ConfigError("holdout_rounds must be >= 1");
  if (holdout_rounds >= rounds) throw ConfigError("holdout_rounds must be < rounds");
  if (seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (top_fraction <= 0.0 || top_fraction >= 1.0)
    throw ConfigError("top_fraction must be in (0, 1)");
  if (propensity_clip <= 0.0 || propensity_clip > 1.0)
    throw ConfigError("propensity_clip must be in (0, 1]");
  if (scoring.k > world.n_items) throw ConfigError("scoring.k must be <= n_items");
}

SweepResult run_static_sweep(const ExperimentConfig& config) {
  config.validate();
  SweepResult result;
  for (const std::uint64_t seed : config.seeds) {
    WorldConfig wc = config.world;
    wc.seed = derive_seed(seed, kWorldSalt, config.world.seed);
    const World world = generate_world(wc);
    const std::vector<ImpressionRecord> logs =
        simulate_logs(config, seed, world, config.scoring.gamma);
    sweep_one_seed(config, seed, logs, result);
  }
  aggregate_sweep(result, config.gamma_grid);
  return result;
}

SweepResult run_sweep_on_logs(const ExperimentConfig& config,
                              const std::vector<ImpressionRecord>& logs) {
  config.validate();
  if (logs.empty()) throw DataError("replay requires a non-empty log");
  for (const auto& rec : logs) {
    if (rec.user_id >= config.world.n_users || rec.item_id >= config.world.n_items)
      throw DataError("log record out of configured range: user " +
                      std::to_string(rec.user_id) + " item " + std::to_string(rec.item_id));
  }
  SweepResult result;
  for (const std::uint64_t seed : config.seeds) sweep_one_seed(config, seed, logs, result);
  aggregate_sweep(result, config.gamma_grid);
  return result;
}

GammaChoice grid_search_gamma(const SweepResult& sweep, const SelectionRule& rule) {
  if (sweep.aggregates.empty()) throw DataError("grid search on an empty sweep");
  const MetricAggregate* best = nullptr;
  for (const auto& agg : sweep.aggregates) {
    if (rule.kind == SelectionRule::Kind::ConstrainedPositive &&
        agg.negative_recall_mean > rule.beta)
      continue;
    const double objective =
        rule.kind == SelectionRule::Kind::Scalarized
            ? agg.positive_recall_mean - rule.lambda * agg.negative_recall_mean
            : agg.positive_recall_mean;
    if (best == nullptr) {
      best = &agg;
      continue;
    }
    const double best_objective =
        rule.kind == SelectionRule::Kind::Scalarized
            ? best->positive_recall_mean - rule.lambda * best->negative_recall_mean
            : best->positive_recall_mean;
    // Strict improvement only: ties keep the earlier (smaller) gamma.
    if (objective > best_objective) best = &agg;
  }
  if (best == nullptr)
    throw DataError("no gamma satisfies mean negative recall <= " + std::to_string(rule.beta));
  return {best->gamma, *best};
}

ClosedLoopResult run_closed_loop(const ExperimentConfig& config, double gamma) {
  // The closed loop does not use holdout_rounds or the gamma grid, so a
  // single-round bootstrap-only run is legal here.
  config.world.validate();
  config.train.validate();
  config.scoring.validate();
  if (config.rounds < 1) throw ConfigError("rounds must be >= 1");
  if (config.slate_size < 1 || config.slate_size > config.world.n_items)
    throw ConfigError("slate_size must be in [1, n_items]");
  if (config.exploration_epsilon < 0.0 || config.exploration_epsilon > 1.0)
    throw ConfigError("exploration_epsilon must be in [0, 1]");
  if (config.seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (config.scoring.k > config.world.n_items)
    throw ConfigError("scoring.k must be <= n_items");
  if (gamma < 0.0) throw ConfigError("gamma must be >= 0");

  ClosedLoopResult result;
  const std::vector<UserId> users = all_users(config.world.n_users);

  for (const std::uint64_t seed : config.seeds) {
    WorldConfig wc = config.world;
    wc.seed = derive_seed(seed, kWorldSalt, config.world.seed);
    const World world = generate_world(wc);

    Rng log_rng(derive_seed(seed, kLoggingSalt));
    std::vector<ImpressionRecord> logs;
    ExposureCounts cumulative = ExposureCounts::zeros(config.world.n_items);
    std::vector<RoundTrace> trace;

    for (std::uint32_t round = 0; round < config.rounds; ++round) {
      RoundTrace entry;
      entry.round = round;

      if (round == 0) {
        LoggingPolicy bootstrap;
        bootstrap.kind = LoggingPolicy::Kind::ZipfBootstrap;
        bootstrap.slate_size = config.slate_size;
        LoggingRoundResult r = run_logging_round(world, bootstrap, users, round, log_rng);
        logs.insert(logs.end(), r.records.begin(), r.records.end());
        cumulative = accumulate_exposures(cumulative, r.delta);
        entry.exposure_gini = exposure_gini(cumulative);
        entry.has_model = false;
        trace.push_back(entry);
        continue;
      }

      // Retrain on everything logged so far, serve this round with it.
      TrainConfig tc = config.train;
      tc.seed = derive_seed(seed, kTrainSalt);
      TrainOutput trained;
      try {
        trained = train(logs, tc, config.world.n_users, config.world.n_items);
      } catch (const DataError& e) {
        throw DataError("round " + std::to_string(round) + ": " + e.what());
      }
      const RetrievalIndex index = build_index(trained.params, gamma);

      LoggingPolicy policy;
      policy.kind = LoggingPolicy::Kind::ModelTopK;
      policy.slate_size = config.slate_size;
      policy.exploration_epsilon = config.exploration_epsilon;
      policy.index = &index;
      policy.params = &trained.params;
      policy.cumulative_exposure = &cumulative;

      LoggingRoundResult r = run_logging_round(world, policy, users, round, log_rng);
      logs.insert(logs.end(), r.records.begin(), r.records.end());
      cumulative = accumulate_exposures(cumulative, r.delta);

      // This round's fresh logs are the rolling holdout for the model that
      // produced them.
      const EvaluationSet eval = build_evaluation_set(r.records);
      const MetricsReport report = evaluate_model(trained.params, gamma, config.scoring.k,
                                                  eval, cumulative, config.top_fraction);
      entry.exposure_gini = report.exposure_gini;
      entry.has_model = true;
      entry.positive_recall = report.positive_recall_at_k;
      entry.negative_recall = report.negative_recall_at_k;
      entry.unique_retrieved = report.unique_retrieved;
      entry.popular_dominance = report.popular_dominance;
      trace.push_back(entry);
    }

    result.seeds.push_back(seed);
    result.traces.push_back(std::move(trace));
    result.logs_per_seed.push_back(std::move(logs));
  }
  return result;
}

}  // namespace exporec
