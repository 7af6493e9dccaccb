#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "fairmarl/fair_penalty.hpp"
#include "fairmarl/net.hpp"
#include "fairmarl/ppo.hpp"
#include "fairmarl/rng.hpp"
#include "fairmarl/trajectory.hpp"
#include "oracles.hpp"

using namespace fairmarl;

namespace {

// Direct evaluation of the estimator as a double sum over future deltas.
std::vector<double> gae_oracle(const std::vector<double>& r, const std::vector<double>& v,
                               double bootstrap, bool terminal, double gamma, double lam) {
  int n = static_cast<int>(r.size());
  std::vector<double> delta(n);
  for (int t = 0; t < n; ++t) {
    double next = (t + 1 < n) ? v[t + 1] : (terminal ? 0.0 : bootstrap);
    delta[t] = r[t] + gamma * next - v[t];
  }
  std::vector<double> adv(n, 0.0);
  for (int t = 0; t < n; ++t) {
    for (int k = t; k < n; ++k) adv[t] += std::pow(gamma * lam, k - t) * delta[k];
  }
  return adv;
}

// Batch whose ratios sit well away from the clip corners: half near 1,
// half pushed into the clipped region.
SampleBatch make_batch(const ActorCritic& net, Rng& rng, int n, double adv_scale = 1.0) {
  int obs_dim = net.policy.input_dim();
  int actions = net.policy.output_dim();
  SampleBatch b;
  b.obs = Eigen::MatrixXd::Zero(obs_dim, n);
  b.actions.resize(n);
  b.old_log_prob = Eigen::VectorXd::Zero(n);
  b.advantage = Eigen::VectorXd::Zero(n);
  b.value_target = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < obs_dim; ++d) b.obs(d, i) = rng.uniform(-1.0, 1.0);
    b.actions[i] = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(actions)));
    Eigen::VectorXd p = net.policy_forward(b.obs.col(i));
    double shift = (i % 2 == 0) ? rng.uniform(-0.1, 0.1)
                                : (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.35, 0.6);
    b.old_log_prob[i] = std::log(p[b.actions[i]]) + shift;
    b.advantage[i] = adv_scale * rng.uniform(-2.0, 2.0);
    b.value_target[i] = rng.uniform(-1.0, 1.0);
  }
  return b;
}

TrajectoryBatch random_trajectories(const ActorCritic& net, Rng& rng, int n_agents, int T) {
  TrajectoryBatch batch(T);
  int obs_dim = net.policy.input_dim();
  for (int a = 0; a < n_agents; ++a) {
    batch.add_agent(a);
    for (int t = 0; t < T; ++t) {
      StepRecord s;
      s.observation = Eigen::VectorXd::Zero(obs_dim);
      for (int d = 0; d < obs_dim; ++d) s.observation[d] = rng.uniform(-1.0, 1.0);
      ActionSample pick = sample_action(net, s.observation, rng);
      s.action = pick.action;
      s.log_prob = pick.log_prob;
      s.value_estimate = pick.value;
      s.reward = rng.uniform(-1.0, 2.0);
      s.terminal = (t == T - 1);
      batch.push_step(a, s);
    }
  }
  return batch;
}

}  // namespace

TEST_CASE("gae closed forms") {
  PpoConfig cfg;
  std::vector<double> r{1.0, 0.5, -0.5, 2.0};
  std::vector<double> v{0.2, -0.1, 0.4, 0.3};
  std::vector<double> lp{-0.1, -0.2, -0.3, -0.4};

  SUBCASE("lambda zero is one-step TD") {
    cfg.gamma = 0.9;
    cfg.gae_lambda = 0.0;
    auto out = gae(r, v, lp, 0.0, true, cfg);
    for (int t = 0; t < 4; ++t) {
      double next = (t + 1 < 4) ? v[t + 1] : 0.0;
      double delta = r[t] + 0.9 * next - v[t];
      CHECK(out[t].advantage == doctest::Approx(delta).epsilon(1e-12));
      CHECK(out[t].value_target == doctest::Approx(delta + v[t]).epsilon(1e-12));
      CHECK(out[t].old_log_prob == lp[t]);
    }
  }
  SUBCASE("lambda one with unit gamma and zero values is the suffix sum") {
    cfg.gamma = 1.0;
    cfg.gae_lambda = 1.0;
    std::vector<double> zeros(4, 0.0);
    auto out = gae(r, zeros, lp, 0.0, true, cfg);
    double suffix = 0.0;
    for (int t = 3; t >= 0; --t) {
      suffix += r[t];
      CHECK(out[t].advantage == doctest::Approx(suffix).epsilon(1e-12));
    }
  }
  SUBCASE("random sequences match the double-loop oracle") {
    Rng rng(307);
    for (int trial = 0; trial < 40; ++trial) {
      int n = 6;
      std::vector<double> rr, vv, ll;
      for (int i = 0; i < n; ++i) {
        rr.push_back(rng.uniform(-2.0, 2.0));
        vv.push_back(rng.uniform(-1.0, 1.0));
        ll.push_back(-rng.uniform(0.1, 2.0));
      }
      cfg.gamma = rng.uniform(0.5, 1.0);
      cfg.gae_lambda = rng.uniform();
      bool terminal = trial % 2 == 0;
      double boot = rng.uniform(-1.0, 1.0);
      auto out = gae(rr, vv, ll, boot, terminal, cfg);
      auto want = gae_oracle(rr, vv, boot, terminal, cfg.gamma, cfg.gae_lambda);
      REQUIRE(out.size() == want.size());
      for (int t = 0; t < n; ++t) {
        CHECK(oracle::close_rel(out[t].advantage, want[t], 1e-12));
        CHECK(oracle::close_rel(out[t].value_target, want[t] + vv[t], 1e-12));
      }
    }
  }
}

TEST_CASE("advantages requires bootstrap values for unterminated agents") {
  Rng rng(311);
  ActorCritic net(3, 4, 8, rng);
  PpoConfig cfg;
  TrajectoryBatch batch(3);
  batch.add_agent(0);
  for (int t = 0; t < 3; ++t) {
    StepRecord s;
    s.observation = Eigen::VectorXd::Random(3);
    s.reward = 1.0;
    s.terminal = false;
    batch.push_step(0, s);
  }
  CHECK_THROWS_AS(advantages(batch, {}, cfg), std::invalid_argument);
  CHECK_NOTHROW(advantages(batch, {{0, 0.5}}, cfg));
}

TEST_CASE("flatten lays samples out by agent then step") {
  Rng rng(313);
  ActorCritic net(2, 3, 4, rng);
  PpoConfig cfg;
  TrajectoryBatch batch(2);
  for (int a : {4, 1}) {
    batch.add_agent(a);
    for (int t = 0; t < 2; ++t) {
      StepRecord s;
      s.observation = Eigen::VectorXd::Constant(2, 10.0 * a + t);
      s.reward = 0.0;
      s.terminal = (t == 1);
      batch.push_step(a, s);
    }
  }
  auto adv = advantages(batch, {}, cfg);
  SampleBatch flat = flatten(batch, adv);
  REQUIRE(flat.size() == 4);
  CHECK(flat.obs(0, 0) == 10.0);
  CHECK(flat.obs(0, 1) == 11.0);
  CHECK(flat.obs(0, 2) == 40.0);
  CHECK(flat.obs(0, 3) == 41.0);

  SUBCASE("subset keeps the chosen columns") {
    SampleBatch sub = flat.subset({2, 0});
    REQUIRE(sub.size() == 2);
    CHECK(sub.obs(0, 0) == 40.0);
    CHECK(sub.obs(0, 1) == 10.0);
  }
}

TEST_CASE("clip objective matches its closed forms and stays pessimistic") {
  CHECK(clip_objective(1.0, 0.7, 0.2) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(clip_objective(1.0, -0.7, 0.3) == doctest::Approx(-0.7).epsilon(1e-12));
  CHECK(clip_objective(1.5, 1.0, 0.2) == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(clip_objective(0.5, -1.0, 0.2) == doctest::Approx(-0.8).epsilon(1e-12));
  CHECK_THROWS_AS(clip_objective(0.0, 1.0, 0.2), std::domain_error);
  CHECK_THROWS_AS(clip_objective(-1.0, 1.0, 0.2), std::domain_error);

  Rng rng(317);
  for (int i = 0; i < 2000; ++i) {
    double ratio = rng.uniform(0.01, 3.0);
    double adv = rng.uniform(-2.0, 2.0);
    double eps = rng.uniform(0.05, 0.5);
    CHECK(clip_objective(ratio, adv, eps) <= ratio * adv + 1e-15);
  }
}

TEST_CASE("value loss is the squared error") {
  CHECK(value_loss(2.0, 5.0) == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(value_loss(5.0, 2.0) == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(value_loss(3.0, 3.0) == 0.0);
}

TEST_CASE("dynamic lambda balances magnitudes and clips") {
  CHECK(dynamic_lambda(2.0, 4.0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(dynamic_lambda(1.0, 0.0) == 10.0);
  CHECK(dynamic_lambda(1.0, 0.0, 3.0) == 3.0);
  CHECK(dynamic_lambda(0.0, 5.0) == 0.0);
  double a = dynamic_lambda(2.0, 4.0);
  double b = dynamic_lambda(6.0, 12.0);
  CHECK(a == doctest::Approx(b).epsilon(1e-6));
}

TEST_CASE("ppo loss reduces to the mean advantage at the old policy") {
  Rng rng(331);
  ActorCritic net(3, 4, 8, rng);
  PpoConfig cfg;
  cfg.c1 = 0.0;
  cfg.c2 = 0.0;

  SampleBatch b;
  int n = 6;
  b.obs = Eigen::MatrixXd::Random(3, n);
  b.actions.resize(n);
  b.old_log_prob = Eigen::VectorXd::Zero(n);
  b.advantage = Eigen::VectorXd::Zero(n);
  b.value_target = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    b.actions[i] = i % 4;
    Eigen::VectorXd p = net.policy_forward(b.obs.col(i));
    b.old_log_prob[i] = std::log(p[b.actions[i]]);  // ratio exactly 1
    b.advantage[i] = static_cast<double>(i) - 2.5;
  }
  CHECK(ppo_loss(net, b, cfg) == doctest::Approx(b.advantage.mean()).epsilon(1e-12));

  SUBCASE("entropy coefficient enters linearly") {
    PpoConfig c0 = cfg, c1 = cfg, c2 = cfg;
    c1.c2 = 1.0;
    c2.c2 = 0.4;
    double base = ppo_loss(net, b, c0);
    double full = ppo_loss(net, b, c1);
    double mid = ppo_loss(net, b, c2);
    CHECK(mid == doctest::Approx(base + 0.4 * (full - base)).epsilon(1e-10));
    CHECK(full >= base);  // entropy is non-negative
  }
}

TEST_CASE("ppo loss matches a term-by-term hand assembly on five samples") {
  Rng rng(337);
  ActorCritic net(2, 3, 4, rng);
  PpoConfig cfg;
  cfg.clip_epsilon = 0.2;
  cfg.c1 = 0.5;
  cfg.c2 = 0.01;

  SampleBatch b = make_batch(net, rng, 5);
  double want = 0.0;
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXd p = net.policy_forward(b.obs.col(i));
    double ratio = std::exp(std::log(p[b.actions[i]]) - b.old_log_prob[i]);
    double clipped = std::min(ratio, std::min(std::max(ratio, 0.8), 1.2));
    double clip_term = std::min(ratio * b.advantage[i], clipped * b.advantage[i]);
    double v = net.value_forward(b.obs.col(i));
    double vf = (v - b.value_target[i]) * (v - b.value_target[i]);
    double h = 0.0;
    for (int k = 0; k < 3; ++k) h -= p[k] > 0 ? p[k] * std::log(p[k]) : 0.0;
    want += clip_term - cfg.c1 * vf + cfg.c2 * h;
  }
  want /= 5.0;
  CHECK(ppo_loss(net, b, cfg) == doctest::Approx(want).epsilon(1e-12));

  SUBCASE("empty batch is rejected") {
    SampleBatch empty;
    empty.obs = Eigen::MatrixXd::Zero(2, 0);
    empty.old_log_prob = Eigen::VectorXd::Zero(0);
    empty.advantage = Eigen::VectorXd::Zero(0);
    empty.value_target = Eigen::VectorXd::Zero(0);
    CHECK_THROWS_AS(ppo_loss(net, empty, cfg), std::invalid_argument);
  }
}

TEST_CASE("penalised loss is the plain loss minus the weighted penalty") {
  CHECK(fair_ppo_loss(1.0, 0.4, 0.5) == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(fair_ppo_loss(1.0, 0.4, 0.0) == 1.0);
  CHECK(fair_ppo_loss(1.0, 0.0, 7.0) == 1.0);

  Rng rng(347);
  ActorCritic net(3, 4, 8, rng);
  PpoConfig cfg;
  SampleBatch b = make_batch(net, rng, 6);

  PenaltyTerm inactive;
  CHECK(fair_ppo_loss(net, b, inactive, 3.0, cfg) ==
        doctest::Approx(ppo_loss(net, b, cfg)).epsilon(1e-12));

  PenaltyTerm term;
  term.constant_part = 0.3;
  term.value_weight = 0.0;
  CHECK(fair_ppo_loss(net, b, term, 2.0, cfg) ==
        doctest::Approx(ppo_loss(net, b, cfg) - 2.0 * 0.3).epsilon(1e-12));
}

TEST_CASE("objective gradient matches central finite differences") {
  Rng rng(353);
  PpoConfig cfg;
  int checked = 0;
  for (int trial = 0; trial < 4; ++trial) {
    ActorCritic net(3, 4, 8, rng);
    SampleBatch b = make_batch(net, rng, 6);

    PenaltyTerm term;
    double lambda = 0.0;
    if (trial % 2 == 1) {
      TrajectoryBatch traj = random_trajectories(net, rng, 4, 3);
      std::vector<AgentProfile> profiles;
      for (int a = 0; a < 4; ++a) {
        AgentProfile p;
        p.id = a;
        p.z = a % 2;
        profiles.push_back(p);
      }
      PenaltyInputs inputs = dp_penalty_inputs(traj, partition(profiles));
      PenaltySpec spec;
      spec.alpha = 0.7;
      spec.beta = 0.9;
      PenaltyNormalizer norm;
      term = assemble_penalty(std::move(inputs), spec, norm, net.value);
      lambda = 1.3;
    }

    PpoGradient grad = objective_gradient(net, b, cfg, trial % 2 == 1 ? &term : nullptr, lambda);
    auto loss = [&]() { return fair_ppo_loss(net, b, term, lambda, cfg); };

    auto check_net = [&](Mlp& m, const Mlp::Grad& g) {
      for (std::size_t l = 0; l < m.layer_count(); ++l) {
        for (int i = 0; i < m.weight(l).rows(); ++i) {
          for (int j = 0; j < m.weight(l).cols(); ++j) {
            double fd = oracle::central_diff(&m.weight(l)(i, j), 1e-5, loss);
            CHECK(std::abs(g.w[l](i, j) - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
            ++checked;
          }
        }
        for (int i = 0; i < m.bias(l).size(); ++i) {
          double fd = oracle::central_diff(&m.bias(l)(i), 1e-5, loss);
          CHECK(std::abs(g.b[l](i) - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
          ++checked;
        }
      }
    };
    check_net(net.policy, grad.policy);
    check_net(net.value, grad.value);
  }
  CHECK(checked > 500);
}

TEST_CASE("learner updates are deterministic and improve the objective") {
  Rng rng(359);
  ActorCritic net(3, 4, 8, rng);
  FairPpoConfig cfg;
  cfg.ppo.minibatch_size = 8;
  cfg.ppo.epochs = 2;

  Rng data_rng(361);
  SampleBatch b = make_batch(net, data_rng, 24);

  PpoLearner l1(net, cfg, 77);
  PpoLearner l2(net, cfg, 77);
  UpdateStats s1 = l1.update(b);
  UpdateStats s2 = l2.update(b);
  CHECK(s1.objective_before == s2.objective_before);
  CHECK(s1.minibatches == 2 * 3);
  CHECK(s1.penalty == 0.0);
  CHECK(s1.lambda == 0.0);

  ParameterSet p1 = l1.net().parameters();
  ParameterSet p2 = l2.net().parameters();
  for (std::size_t i = 0; i < p1.tensors.size(); ++i) {
    CHECK((p1.tensors[i].second - p2.tensors[i].second).cwiseAbs().maxCoeff() == 0.0);
  }

  PpoConfig eval_cfg = cfg.ppo;
  CHECK(ppo_loss(l1.net(), b, eval_cfg) > s1.objective_before - 0.02);
}

TEST_CASE("an inactive penalty term leaves the update exactly plain") {
  Rng rng(367);
  ActorCritic net(3, 4, 8, rng);
  FairPpoConfig fair_cfg;
  fair_cfg.penalty.alpha = 0.0;
  fair_cfg.penalty.beta = 0.0;
  FairPpoConfig plain_cfg = fair_cfg;

  Rng data_rng(373);
  SampleBatch b = make_batch(net, data_rng, 20);

  PpoLearner fair(net, fair_cfg, 99);
  PpoLearner plain(net, plain_cfg, 99);

  PenaltyTerm inactive;  // alpha = beta = 0 assembles to an inactive term
  for (int step = 0; step < 10; ++step) {
    fair.update(b, &inactive);
    plain.update(b, nullptr);
  }
  ParameterSet pf = fair.net().parameters();
  ParameterSet pp = plain.net().parameters();
  REQUIRE(pf.tensors.size() == pp.tensors.size());
  for (std::size_t i = 0; i < pf.tensors.size(); ++i) {
    CHECK((pf.tensors[i].second - pp.tensors[i].second).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("config validation rejects out-of-range fields") {
  PpoConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.gamma = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = PpoConfig{};
  cfg.minibatch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  FairPpoConfig fc;
  CHECK_NOTHROW(fc.validate());
  fc.lambda_value = -1.0;
  CHECK_THROWS_AS(fc.validate(), std::invalid_argument);
  fc = FairPpoConfig{};
  fc.penalty_timing = "timestep";
  CHECK_THROWS_AS(fc.validate(), std::invalid_argument);
}
