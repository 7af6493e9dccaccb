#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "fairmarl/fair_penalty.hpp"
#include "fairmarl/fairness.hpp"
#include "fairmarl/net.hpp"
#include "fairmarl/rng.hpp"
#include "fairmarl/trajectory.hpp"
#include "oracles.hpp"

using namespace fairmarl;

namespace {

// Four agents, two per z group, with fixed rewards and distinctive
// observations so group value means are easy to compute by hand.
struct Toy {
  TrajectoryBatch batch{2};
  std::vector<AgentProfile> profiles;
  GroupPartition part;
};

Toy make_toy(int obs_dim = 3) {
  Toy toy;
  for (int a = 0; a < 4; ++a) {
    AgentProfile p;
    p.id = a;
    p.z = a < 2 ? 1 : 0;
    p.lf = a % 2;
    toy.profiles.push_back(p);
    toy.batch.add_agent(a);
    for (int t = 0; t < 2; ++t) {
      StepRecord s;
      s.observation = Eigen::VectorXd::Constant(obs_dim, 0.1 * a + 0.05 * t);
      s.reward = a + 0.5 * t;
      s.terminal = (t == 1);
      toy.batch.push_step(a, s);
    }
  }
  toy.part = partition(toy.profiles);
  return toy;
}

double mean_value(const Mlp& net, const Eigen::MatrixXd& obs) {
  return net.forward(obs).row(0).mean();
}

}  // namespace

TEST_CASE("dp penalty inputs carry the group return gap and one value contrast") {
  Toy toy = make_toy();
  PenaltyInputs in = dp_penalty_inputs(toy.batch, toy.part);

  // Sensitive returns: 0.5, 2.5 -> mean 1.5. Non-sensitive: 4.5, 6.5 -> 5.5.
  CHECK(in.raw_return_part == doctest::Approx(4.0).epsilon(1e-12));
  REQUIRE(in.contrasts.size() == 1);
  CHECK(in.contrasts[0].obs_a.cols() + in.contrasts[0].obs_b.cols() == 8);

  Rng rng(401);
  Mlp value({3, 6, 1}, rng);
  double raw = raw_value_part(value, in.contrasts);
  double want = std::abs(mean_value(value, in.contrasts[0].obs_a) -
                         mean_value(value, in.contrasts[0].obs_b));
  CHECK(raw == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("csp penalty inputs split contrasts per lf level") {
  Toy toy = make_toy();
  PenaltyInputs in = csp_penalty_inputs(toy.batch, toy.part);
  // lf 0: agents 0 (z1, G=0.5) and 2 (z0, G=4.5); lf 1: agents 1 (G=2.5), 3 (G=6.5).
  CHECK(in.raw_return_part == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(in.contrasts.size() == 2);

  SUBCASE("levels missing one side are skipped") {
    Toy skew = make_toy();
    skew.profiles[2].lf = 1;  // lf 0 now has no z=0 member
    skew.part = partition(skew.profiles);
    PenaltyInputs thin = csp_penalty_inputs(skew.batch, skew.part);
    CHECK(thin.contrasts.size() == 1);
  }
}

TEST_CASE("cf penalty inputs pair factual and counterfactual by agent") {
  Toy f = make_toy();
  Toy c = make_toy();
  // Perturb the counterfactual rewards of agent 0 by +1 per step.
  TrajectoryBatch shifted(2);
  for (int a = 0; a < 4; ++a) {
    shifted.add_agent(a);
    for (const StepRecord& s : c.batch.steps(a)) {
      StepRecord t = s;
      if (a == 0) t.reward += 1.0;
      shifted.push_step(a, t);
    }
  }
  PenaltyInputs in = cf_penalty_inputs(f.batch, shifted);
  CHECK(in.raw_return_part == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(in.contrasts.size() == 4);

  SUBCASE("mismatched agent sets are rejected") {
    TrajectoryBatch extra(2);
    extra.add_agent(9);
    StepRecord s;
    s.observation = Eigen::VectorXd::Zero(3);
    extra.push_step(9, s);
    CHECK_THROWS_AS(cf_penalty_inputs(f.batch, extra), std::invalid_argument);
  }
}

TEST_CASE("assembled penalty equals its components at assembly time") {
  Toy toy = make_toy();
  Rng rng(409);
  Mlp value({3, 6, 1}, rng);

  PenaltySpec spec;
  spec.alpha = 0.8;
  spec.beta = 0.6;
  PenaltyNormalizer norm;

  PenaltyInputs in = dp_penalty_inputs(toy.batch, toy.part);
  double raw_val = raw_value_part(value, in.contrasts);
  REQUIRE(raw_val > 1e-9);

  PenaltyTerm term = assemble_penalty(std::move(in), spec, norm, value);
  CHECK(term.active());
  // First normalization maps both components to 1, so the penalty reads
  // alpha * 1 + beta * 1 at the assembly-time parameters.
  CHECK(penalty_value(value, term) == doctest::Approx(1.4).epsilon(1e-9));
  CHECK(norm.return_scale() == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(norm.value_scale() == doctest::Approx(raw_val).epsilon(1e-12));

  SUBCASE("a smaller later episode yields fractional components") {
    Toy half = make_toy();
    PenaltyInputs again = dp_penalty_inputs(half.batch, half.part);
    again.raw_return_part = 2.0;  // half the recorded gap
    PenaltyTerm second = assemble_penalty(std::move(again), spec, norm, value);
    CHECK(second.constant_part == doctest::Approx(0.8 * 0.5).epsilon(1e-9));
  }
}

TEST_CASE("zero weights assemble to an inactive term and leave the normalizer untouched") {
  Toy toy = make_toy();
  Rng rng(419);
  Mlp value({3, 6, 1}, rng);
  PenaltySpec spec;  // alpha = beta = 0
  PenaltyNormalizer norm;
  PenaltyTerm term = assemble_penalty(dp_penalty_inputs(toy.batch, toy.part), spec, norm, value);
  CHECK_FALSE(term.active());
  CHECK(penalty_value(value, term) == 0.0);
  CHECK(norm.return_scale() == doctest::Approx(1e-8).epsilon(1e-12));
  CHECK(norm.value_scale() == doctest::Approx(1e-8).epsilon(1e-12));
}

TEST_CASE("penalty gradient matches finite differences through the value network") {
  Toy toy = make_toy();
  Rng rng(421);
  Mlp value({3, 6, 1}, rng);
  PenaltySpec spec;
  spec.alpha = 0.5;
  spec.beta = 1.0;
  PenaltyNormalizer norm;
  PenaltyTerm term = assemble_penalty(dp_penalty_inputs(toy.batch, toy.part), spec, norm, value);
  double lambda = 1.7;

  Mlp::Grad grad = value.zero_grad();
  accumulate_penalty_gradient(value, term, lambda, grad);

  // accumulate_penalty_gradient contributes the ascent direction of
  // -lambda * penalty, i.e. the gradient of the negated weighted penalty.
  auto objective = [&]() { return -lambda * penalty_value(value, term); };
  for (std::size_t l = 0; l < value.layer_count(); ++l) {
    for (int i = 0; i < value.weight(l).rows(); ++i) {
      for (int j = 0; j < value.weight(l).cols(); ++j) {
        double fd = oracle::central_diff(&value.weight(l)(i, j), 1e-5, objective);
        CHECK(std::abs(grad.w[l](i, j) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
    for (int i = 0; i < value.bias(l).size(); ++i) {
      double fd = oracle::central_diff(&value.bias(l)(i), 1e-5, objective);
      CHECK(std::abs(grad.b[l](i) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("frozen contrast sides contribute constants, not gradients") {
  Rng rng(431);
  Mlp value({2, 4, 1}, rng);
  PenaltyTerm term;
  term.value_weight = 1.0;
  ValueContrast c;
  c.obs_a = Eigen::MatrixXd::Zero(2, 0);
  c.const_a = 5.0;
  c.obs_b = Eigen::MatrixXd::Random(2, 3);
  c.const_b = 0.0;
  term.contrasts.push_back(c);

  double live = mean_value(value, term.contrasts[0].obs_b);
  CHECK(penalty_value(value, term) == doctest::Approx(std::abs(5.0 - live)).epsilon(1e-12));

  Mlp::Grad grad = value.zero_grad();
  accumulate_penalty_gradient(value, term, 2.0, grad);
  auto objective = [&]() { return -2.0 * penalty_value(value, term); };
  double fd = oracle::central_diff(&value.weight(0)(0, 0), 1e-5, objective);
  CHECK(std::abs(grad.w[0](0, 0) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
}

TEST_CASE("group penalty projects one assembly onto both learners") {
  Toy toy = make_toy();
  Rng rng(433);
  Mlp value0({3, 6, 1}, rng);
  Mlp value1({3, 6, 1}, rng);

  GroupPenaltyInputs in = group_dp_penalty_inputs(toy.batch, toy.part);
  CHECK(in.raw_return_part == doctest::Approx(4.0).epsilon(1e-12));
  REQUIRE(in.contrasts.size() == 1);
  CHECK(in.contrasts[0].net_a != in.contrasts[0].net_b);

  PenaltySpec spec;
  spec.alpha = 1.0;
  spec.beta = 1.0;
  PenaltyNormalizer norm;
  GroupPenaltyTerms terms =
      assemble_group_penalty(std::move(in), spec, norm, value0, value1);

  CHECK(terms.value == doctest::Approx(2.0).epsilon(1e-9));  // both parts normalized to 1
  CHECK(penalty_value(value0, terms.net0) == doctest::Approx(terms.value).epsilon(1e-9));
  CHECK(penalty_value(value1, terms.net1) == doctest::Approx(terms.value).epsilon(1e-9));

  SUBCASE("the shared normalizer advances exactly once") {
    CHECK(norm.return_scale() == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(norm.value_scale() > 1e-8);
  }
  SUBCASE("each projection only differentiates its own network") {
    Mlp::Grad g0 = value0.zero_grad();
    accumulate_penalty_gradient(value0, terms.net0, 1.0, g0);
    auto objective = [&]() { return -penalty_value(value0, terms.net0); };
    double fd = oracle::central_diff(&value0.weight(0)(0, 0), 1e-5, objective);
    CHECK(std::abs(g0.w[0](0, 0) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("group penalty with zero weights is inert") {
  Toy toy = make_toy();
  Rng rng(439);
  Mlp value0({3, 6, 1}, rng);
  Mlp value1({3, 6, 1}, rng);
  PenaltySpec spec;  // zeros
  PenaltyNormalizer norm;
  GroupPenaltyTerms terms =
      assemble_group_penalty(group_dp_penalty_inputs(toy.batch, toy.part), spec, norm, value0,
                             value1);
  CHECK(terms.value == 0.0);
  CHECK_FALSE(terms.net0.active());
  CHECK_FALSE(terms.net1.active());
  CHECK(norm.return_scale() == doctest::Approx(1e-8).epsilon(1e-12));
}

TEST_CASE("group counterfactual inputs score flipped states with the opposite network") {
  Toy f = make_toy();
  Toy c = make_toy();
  std::map<AgentId, int> z;
  for (const auto& p : f.profiles) z[p.id] = p.z;
  GroupPenaltyInputs in = group_cf_penalty_inputs(f.batch, c.batch, z);
  CHECK(in.raw_return_part == 0.0);
  REQUIRE(in.contrasts.size() == 4);
  for (const auto& lc : in.contrasts) {
    CHECK(lc.net_a != lc.net_b);
    CHECK(lc.obs_a.cols() == lc.obs_b.cols());
  }
}
