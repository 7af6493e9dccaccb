// Microbenchmarks for the hot paths: network passes, simulator stepping, and
// the fairness metrics.

#include <benchmark/benchmark.h>

#include <map>
#include <vector>

#include "fairmarl/env/ah.hpp"
#include "fairmarl/env/hospital.hpp"
#include "fairmarl/fairness.hpp"
#include "fairmarl/harness/config.hpp"
#include "fairmarl/net.hpp"
#include "fairmarl/ppo.hpp"
#include "fairmarl/rng.hpp"

namespace {

using namespace fairmarl;

void BM_PolicyForward(benchmark::State& state) {
  Rng rng(1);
  ActorCritic net(ah_observation_dim(), kAhActionCount, 32, rng);
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(ah_observation_dim());
  for (int i = 0; i < obs.size(); ++i) obs(i) = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.policy_forward(obs));
    benchmark::DoNotOptimize(net.value_forward(obs));
  }
}
BENCHMARK(BM_PolicyForward);

void BM_PpoUpdate(benchmark::State& state) {
  Rng rng(2);
  const int obs_dim = 32, actions = 10, n = 256;
  ActorCritic net(obs_dim, actions, 32, rng);
  SampleBatch batch;
  batch.obs = Eigen::MatrixXd(obs_dim, n);
  batch.actions.assign(n, 0);
  batch.old_log_prob = Eigen::VectorXd(n);
  batch.advantage = Eigen::VectorXd(n);
  batch.value_target = Eigen::VectorXd(n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < obs_dim; ++i) batch.obs(i, j) = rng.uniform(-1.0, 1.0);
    int a = static_cast<int>(rng.uniform_index(actions));
    batch.actions[static_cast<std::size_t>(j)] = a;
    batch.old_log_prob(j) = std::log(net.policy_forward(batch.obs.col(j))(a));
    batch.advantage(j) = rng.uniform(-1.0, 1.0);
    batch.value_target(j) = rng.uniform(-1.0, 1.0);
  }
  FairPpoConfig cfg;
  PpoLearner learner(net, cfg, 3);
  for (auto _ : state) {
    learner.update(batch, nullptr);
  }
}
BENCHMARK(BM_PpoUpdate);

void BM_GridStep(benchmark::State& state) {
  AhConfig cfg = desk_ah_config().ah;
  AhState st = ah_reset(cfg, 11);
  Rng act(12);
  for (auto _ : state) {
    std::map<AgentId, AhAction> acts;
    for (int i = 0; i < cfg.n_agents; ++i)
      acts[i] = ah_action_from_index(static_cast<int>(act.uniform_index(kAhActionCount)));
    benchmark::DoNotOptimize(ah_step(st, acts));
  }
}
BENCHMARK(BM_GridStep);

void BM_HospitalDay(benchmark::State& state) {
  HsConfig cfg = desk_hs_config().hs;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    HsState s = hs_reset(cfg, ++seed);
    Rng act(seed);
    while (std::optional<HsDecision> d = hs_advance(s)) {
      int a = static_cast<int>(act.uniform_index(static_cast<std::uint64_t>(d->action_count)));
      hs_apply(s, *d, a);
    }
    benchmark::DoNotOptimize(s.treated);
  }
}
BENCHMARK(BM_HospitalDay);

void BM_FairnessReport(benchmark::State& state) {
  Rng rng(5);
  std::vector<AgentProfile> profiles;
  std::map<AgentId, double> returns;
  for (int i = 0; i < 100; ++i) {
    AgentProfile p;
    p.id = i;
    p.z = i % 2;
    p.lf = i % 3;
    p.action_count = 4;
    profiles.push_back(p);
    returns[i] = rng.uniform(-5.0, 5.0);
  }
  GroupPartition part = partition(profiles);
  for (auto _ : state) {
    benchmark::DoNotOptimize(report(returns, part));
  }
}
BENCHMARK(BM_FairnessReport);

}  // namespace

BENCHMARK_MAIN();
