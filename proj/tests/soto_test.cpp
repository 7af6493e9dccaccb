#include <doctest.h>

#include <cmath>
#include <map>
#include <stdexcept>

#include "fairmarl/algo/soto.hpp"
#include "fairmarl/net.hpp"
#include "fairmarl/rng.hpp"

using namespace fairmarl;

TEST_CASE("team-head probability ramps with training progress") {
  SotoConfig cfg;
  cfg.beta_proportion = 0.5;
  CHECK(soto_team_probability(0.0, cfg) == 0.0);
  CHECK(soto_team_probability(0.25, cfg) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(soto_team_probability(0.5, cfg) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(soto_team_probability(1.0, cfg) == doctest::Approx(1.0).epsilon(1e-12));

  SUBCASE("high beta saturates at one") {
    cfg.beta_proportion = 1.0;
    CHECK(soto_team_probability(0.75, cfg) == 1.0);
  }
  SUBCASE("zero beta never leaves the self head") {
    cfg.beta_proportion = 0.0;
    CHECK(soto_team_probability(1.0, cfg) == 0.0);
  }
  SUBCASE("progress outside the unit interval is rejected") {
    CHECK_THROWS_AS(soto_team_probability(-0.1, cfg), std::invalid_argument);
    CHECK_THROWS_AS(soto_team_probability(1.1, cfg), std::invalid_argument);
  }
}

TEST_CASE("head selection tracks the schedule") {
  SotoConfig cfg;
  cfg.beta_proportion = 0.5;
  Rng rng(311);
  for (int i = 0; i < 50; ++i) {
    CHECK(soto_select_head(rng, 0.0, cfg) == SotoHead::Self);
  }
  cfg.beta_proportion = 1.0;
  for (int i = 0; i < 50; ++i) {
    CHECK(soto_select_head(rng, 1.0, cfg) == SotoHead::Team);
  }

  SUBCASE("mid-schedule frequencies match the probability") {
    cfg.beta_proportion = 0.5;
    Rng r(313);
    int team = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      if (soto_select_head(r, 0.5, cfg) == SotoHead::Team) ++team;
    }
    // p = 0.5, sigma = sqrt(n/4) ~ 70.7; allow 4.5 sigma.
    CHECK(team > n / 2 - 320);
    CHECK(team < n / 2 + 320);
  }
}

TEST_CASE("welfare weights privilege worse-off agents and average to one") {
  SotoConfig cfg;
  cfg.alpha_fairness = 0.9;

  SUBCASE("equal utilities weigh everyone equally") {
    auto w = soto_welfare_weight({{0, 3.0}, {1, 3.0}, {2, 3.0}}, cfg);
    for (const auto& [id, weight] : w) CHECK(weight == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("weights normalize to mean one") {
    auto w = soto_welfare_weight({{0, 1.0}, {1, 2.0}, {2, 7.0}, {3, 0.5}}, cfg);
    double sum = 0.0;
    for (const auto& [id, weight] : w) sum += weight;
    CHECK(sum == doctest::Approx(4.0).epsilon(1e-12));
  }
  SUBCASE("lower utility never weighs less") {
    auto w = soto_welfare_weight({{0, 1.0}, {1, 4.0}, {2, 9.0}}, cfg);
    CHECK(w.at(0) > w.at(1));
    CHECK(w.at(1) > w.at(2));
  }
  SUBCASE("the power law fixes the exact ratio") {
    cfg.alpha_fairness = 1.0;
    auto w = soto_welfare_weight({{0, 1.0}, {1, 4.0}}, cfg);
    CHECK(w.at(0) / w.at(1) == doctest::Approx(4.0).epsilon(1e-12));
  }
  SUBCASE("negative utilities are shifted before weighting") {
    auto w = soto_welfare_weight({{0, -2.0}, {1, 2.0}}, cfg);
    CHECK(w.at(0) > w.at(1));
    CHECK((w.at(0) + w.at(1)) / 2.0 == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("an empty map is rejected") {
    CHECK_THROWS_AS(soto_welfare_weight({}, cfg), std::invalid_argument);
  }
}

TEST_CASE("group ratio weight favors the impaired group when it lags") {
  SotoConfig cfg;
  cfg.alpha_fairness = 1.0;
  CHECK(soto_group_ratio_weight(4.0, 1.0, cfg) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(soto_group_ratio_weight(3.0, 3.0, cfg) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(soto_group_ratio_weight(1.0, 4.0, cfg) == doctest::Approx(0.25).epsilon(1e-12));

  SUBCASE("alpha is the exponent") {
    cfg.alpha_fairness = 0.5;
    CHECK(soto_group_ratio_weight(4.0, 1.0, cfg) == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("negative group means survive the shift") {
    cfg.alpha_fairness = 1.0;
    double w = soto_group_ratio_weight(1.0, -3.0, cfg);
    CHECK(w > 1.0);
    CHECK(std::isfinite(w));
  }
}

TEST_CASE("the two-headed policy shares shape but not parameters") {
  Rng init(317);
  SotoPolicy p = make_soto_policy(7, 5, 16, init);
  Eigen::VectorXd obs = Eigen::VectorXd::LinSpaced(7, -0.5, 0.5);
  CHECK(p.self.policy_forward(obs).size() == 5);
  CHECK(p.team.policy_forward(obs).size() == 5);
  CHECK(p.self.architecture() == p.team.architecture());
  CHECK((p.self.policy.weight(0) - p.team.policy.weight(0)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("configuration bounds are enforced") {
  SotoConfig cfg;
  cfg.alpha_fairness = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SotoConfig{};
  cfg.beta_proportion = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = SotoConfig{};
  cfg.ppo.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  SotoConfig ah = soto_ah_config(0.9);
  CHECK(ah.alpha_fairness == 0.9);
  CHECK(ah.beta_proportion == 0.5);
  ah.validate();
  SotoConfig hs = soto_hs_config();
  CHECK(hs.alpha_fairness == 0.9);
  CHECK(hs.beta_proportion == 0.5);
  hs.validate();
}
