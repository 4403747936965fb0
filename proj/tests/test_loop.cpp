#include <doctest.h>

#include <cmath>

#include "exporec/loop.hpp"

using namespace exporec;

namespace {

// Desk-scale-in-miniature config so the whole suite stays fast.
ExperimentConfig small_config() {
  ExperimentConfig c;
  c.world.n_users = 60;
  c.world.n_items = 200;
  c.world.latent_dim = 4;
  c.world.popularity_skew = 0.8;
  c.world.seed = 1;
  c.train.epochs = 6;
  c.train.embed_dim = 8;
  c.train.exposure_embed_dim = 8;
  c.train.random_negatives_per_record = 3;
  c.scoring.k = 20;
  c.rounds = 4;
  c.slate_size = 10;
  c.exploration_epsilon = 0.1;
  c.gamma_grid = {0.0, 0.5, 1.0};
  c.holdout_rounds = 1;
  c.seeds = {1, 2};
  return c;
}

SweepResult table1_fixture() {
  // selection-logic fixture shaped like the published sweep: positive
  // recall 29.8 / 31.7 / 28.0 and negative recall 11.0 / 9.9 / 7.9 at
  // gamma 0, 0.65, 1.0
  SweepResult sweep;
  const double gammas[] = {0.0, 0.65, 1.0};
  const double pos[] = {0.298, 0.317, 0.280};
  const double neg[] = {0.110, 0.099, 0.079};
  for (int i = 0; i < 3; ++i) {
    MetricAggregate agg;
    agg.gamma = gammas[i];
    agg.positive_recall_mean = pos[i];
    agg.negative_recall_mean = neg[i];
    sweep.aggregates.push_back(agg);
  }
  return sweep;
}

}  // namespace

TEST_CASE("config validation names the offending field") {
  ExperimentConfig c = small_config();
  c.gamma_grid = {};
  CHECK_THROWS_WITH_AS(c.validate(), "gamma_grid must be non-empty", ConfigError);
  c = small_config();
  c.gamma_grid = {0.5, 0.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.holdout_rounds = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("static sweep counting and inference-time-only contract") {
  ExperimentConfig c = small_config();
  c.gamma_grid = {0.0};
  const SweepResult single = run_static_sweep(c);
  CHECK(single.cells.size() == c.seeds.size());
  CHECK(single.opc.size() == c.seeds.size());

  c.gamma_grid = {0.0, 0.5, 1.0};
  const SweepResult sweep = run_static_sweep(c);
  CHECK(sweep.cells.size() == 6);
  // one model per seed, shared across every gamma
  for (const std::uint64_t seed : c.seeds) {
    std::uint64_t fp = 0;
    for (const auto& cell : sweep.cells) {
      if (cell.seed != seed) continue;
      if (fp == 0) fp = cell.model_fingerprint;
      CHECK(cell.model_fingerprint == fp);
    }
  }
  CHECK(sweep.aggregates.size() == 3);
  CHECK(sweep.exposure_spearman.size() == c.seeds.size());
}

TEST_CASE("static sweep is deterministic") {
  ExperimentConfig c = small_config();
  c.seeds = {3};
  const SweepResult a = run_static_sweep(c);
  const SweepResult b = run_static_sweep(c);
  REQUIRE(a.cells.size() == b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].report.positive_recall_at_k == b.cells[i].report.positive_recall_at_k);
    CHECK(a.cells[i].report.negative_recall_at_k == b.cells[i].report.negative_recall_at_k);
    CHECK(a.cells[i].model_fingerprint == b.cells[i].model_fingerprint);
  }
}

TEST_CASE("seed isolation: a seed's metrics ignore the rest of the list") {
  ExperimentConfig both = small_config();
  both.seeds = {1, 2};
  ExperimentConfig only = small_config();
  only.seeds = {2};
  const SweepResult a = run_static_sweep(both);
  const SweepResult b = run_static_sweep(only);
  for (const auto& cell_b : b.cells) {
    bool found = false;
    for (const auto& cell_a : a.cells) {
      if (cell_a.seed == cell_b.seed && cell_a.gamma == cell_b.gamma) {
        CHECK(cell_a.report.positive_recall_at_k == cell_b.report.positive_recall_at_k);
        CHECK(cell_a.model_fingerprint == cell_b.model_fingerprint);
        found = true;
      }
    }
    CHECK(found);
  }
}

TEST_CASE("grid search selection rules") {
  const SweepResult sweep = table1_fixture();
  SUBCASE("MaxPositive picks the interior gamma") {
    const GammaChoice choice = grid_search_gamma(sweep, {SelectionRule::Kind::MaxPositive});
    CHECK(choice.gamma == 0.65);
    CHECK(choice.aggregate.positive_recall_mean == doctest::Approx(0.317));
  }
  SUBCASE("Scalarized with lambda 0 is MaxPositive") {
    SelectionRule rule{SelectionRule::Kind::Scalarized};
    rule.lambda = 0.0;
    CHECK(grid_search_gamma(sweep, rule).gamma == 0.65);
  }
  SUBCASE("ConstrainedPositive respects the cap") {
    SelectionRule rule{SelectionRule::Kind::ConstrainedPositive};
    rule.beta = 0.08;  // only gamma = 1.0 qualifies
    CHECK(grid_search_gamma(sweep, rule).gamma == 1.0);
    rule.beta = 0.01;  // nothing qualifies
    CHECK_THROWS_AS(grid_search_gamma(sweep, rule), DataError);
  }
  SUBCASE("singleton sweep returns its only gamma under every rule") {
    SweepResult one;
    MetricAggregate agg;
    agg.gamma = 0.4;
    agg.positive_recall_mean = 0.2;
    agg.negative_recall_mean = 0.1;
    one.aggregates.push_back(agg);
    CHECK(grid_search_gamma(one, {SelectionRule::Kind::MaxPositive}).gamma == 0.4);
    SelectionRule scalarized{SelectionRule::Kind::Scalarized};
    scalarized.lambda = 2.0;
    CHECK(grid_search_gamma(one, scalarized).gamma == 0.4);
  }
  SUBCASE("ties break toward the smaller gamma") {
    SweepResult tied = table1_fixture();
    tied.aggregates[2].positive_recall_mean = tied.aggregates[1].positive_recall_mean;
    CHECK(grid_search_gamma(tied, {SelectionRule::Kind::MaxPositive}).gamma == 0.65);
  }
}

TEST_CASE("closed loop with one round is bootstrap only") {
  ExperimentConfig c = small_config();
  c.rounds = 1;
  c.seeds = {1};
  const ClosedLoopResult result = run_closed_loop(c, 0.0);
  REQUIRE(result.traces.size() == 1);
  REQUIRE(result.traces[0].size() == 1);
  CHECK(!result.traces[0][0].has_model);
  CHECK(result.traces[0][0].exposure_gini > 0.0);
  CHECK(result.logs_per_seed[0].size() == c.world.n_users * c.slate_size);
}

TEST_CASE("closed loop trace shape and determinism") {
  ExperimentConfig c = small_config();
  c.seeds = {5};
  const ClosedLoopResult a = run_closed_loop(c, 0.5);
  REQUIRE(a.traces[0].size() == c.rounds);
  for (std::size_t r = 1; r < c.rounds; ++r) CHECK(a.traces[0][r].has_model);
  const ClosedLoopResult b = run_closed_loop(c, 0.5);
  for (std::size_t r = 0; r < c.rounds; ++r) {
    CHECK(a.traces[0][r].exposure_gini == b.traces[0][r].exposure_gini);
    CHECK(a.traces[0][r].unique_retrieved == b.traces[0][r].unique_retrieved);
  }
  CHECK(a.logs_per_seed[0] == b.logs_per_seed[0]);
}

TEST_CASE("replaying a closed-loop log reproduces its final-round metrics") {
  ExperimentConfig c = small_config();
  c.seeds = {7};
  const double gamma = 0.5;
  const ClosedLoopResult loop = run_closed_loop(c, gamma);
  const RoundTrace& last = loop.traces[0].back();

  ExperimentConfig replay = c;
  replay.gamma_grid = {gamma};
  replay.holdout_rounds = 1;
  const SweepResult sweep = run_sweep_on_logs(replay, loop.logs_per_seed[0]);
  REQUIRE(sweep.cells.size() == 1);
  const MetricsReport& report = sweep.cells[0].report;
  CHECK(report.positive_recall_at_k == last.positive_recall);
  CHECK(report.negative_recall_at_k == last.negative_recall);
  CHECK(report.unique_retrieved == last.unique_retrieved);
  CHECK(report.popular_dominance == last.popular_dominance);
  CHECK(report.exposure_gini == last.exposure_gini);
}

TEST_CASE("sweep on out-of-range logs fails") {
  ExperimentConfig c = small_config();
  const std::vector<ImpressionRecord> bad = {{0, 999, 0, Feedback::Positive}};
  CHECK_THROWS_AS(run_sweep_on_logs(c, bad), DataError);
}
