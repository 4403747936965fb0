#include <benchmark/benchmark.h>

#include "exporec/model.hpp"
#include "exporec/scoring.hpp"
#include "exporec/world.hpp"

namespace {

using namespace exporec;

ModelParams bench_params(std::size_t n_users, std::size_t n_items) {
  ModelParams p;
  p.n_users = n_users;
  p.n_items = n_items;
  p.d = 16;
  p.d_e = 16;
  p.user_eng = Matrix(n_users, p.d);
  p.item_eng = Matrix(n_items, p.d);
  p.item_eng_bias.assign(n_items, 0.0);
  p.user_exp = Matrix(n_users, p.d_e);
  p.item_exp = Matrix(n_items, p.d_e);
  p.item_exp_bias.assign(n_items, 0.0);
  Rng rng(1);
  for (double& x : p.user_eng.data()) x = rng.normal();
  for (double& x : p.item_eng.data()) x = rng.normal();
  for (double& x : p.user_exp.data()) x = rng.normal();
  for (double& x : p.item_exp.data()) x = rng.normal();
  return p;
}

void BM_RetrieveTopK(benchmark::State& state) {
  const auto n_items = static_cast<std::size_t>(state.range(0));
  const ModelParams params = bench_params(64, n_items);
  const RetrievalIndex index = build_index(params, 0.65);
  UserId user = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(retrieve_top_k(index, params, user, 100));
    user = (user + 1) % 64;
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * n_items);
}
BENCHMARK(BM_RetrieveTopK)->Arg(1000)->Arg(10000)->Arg(100000);

void BM_BuildIndex(benchmark::State& state) {
  const auto n_items = static_cast<std::size_t>(state.range(0));
  const ModelParams params = bench_params(8, n_items);
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_index(params, 0.65));
  }
}
BENCHMARK(BM_BuildIndex)->Arg(10000)->Arg(100000);

void BM_TrainEpoch(benchmark::State& state) {
  const std::size_t n_users = 200, n_items = 1000;
  WorldConfig wc;
  wc.n_users = n_users;
  wc.n_items = n_items;
  wc.latent_dim = 8;
  wc.seed = 2;
  const World world = generate_world(wc);
  Rng rng(3);
  std::vector<ImpressionRecord> logs;
  for (UserId u = 0; u < n_users; ++u)
    for (int i = 0; i < 20; ++i) {
      const auto v = static_cast<ItemId>(rng.uniform_below(n_items));
      logs.push_back({0, u, v, sample_feedback(world, u, v, rng)});
    }
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 4;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train(logs, cfg, n_users, n_items));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * logs.size() *
                          (1 + cfg.random_negatives_per_record));
}
BENCHMARK(BM_TrainEpoch);

}  // namespace

BENCHMARK_MAIN();
