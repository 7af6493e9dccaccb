#pragma once

#include <map>

#include "fairmarl/net.hpp"
#include "fairmarl/ppo.hpp"
#include "fairmarl/rng.hpp"
#include "fairmarl/trajectory.hpp"

namespace fairmarl {

// Two-headed self/team baseline. The self head maximizes the agent's own
// reward; the team head trains with welfare-weighted advantages so that
// worse-off agents pull updates harder. Head choice drifts from self toward
// team as training progresses.
struct SotoConfig {
  double alpha_fairness = 0.9;
  double beta_proportion = 0.5;
  PpoConfig ppo;

  void validate() const;
};

SotoConfig soto_ah_config(double alpha_fairness);
SotoConfig soto_hs_config();

enum class SotoHead { Self = 0, Team = 1 };

// beta_proportion * progress * 2, clipped to [0, 1].
double soto_team_probability(double training_progress, const SotoConfig& cfg);

SotoHead soto_select_head(Rng& rng, double training_progress, const SotoConfig& cfg);

// Per-agent weights proportional to shifted-utility^(-alpha_fairness),
// normalized to mean 1. Lower utility never yields a smaller weight.
std::map<AgentId, double> soto_welfare_weight(const std::map<AgentId, double>& utilities,
                                              const SotoConfig& cfg);

// Single multiplicative weight from the (shifted) group mean-reward ratio,
// non-impaired over impaired, raised to alpha_fairness. Above 1 exactly when
// the impaired group is worse off.
double soto_group_ratio_weight(double mean_non_impaired, double mean_impaired,
                               const SotoConfig& cfg);

struct SotoPolicy {
  ActorCritic self;
  ActorCritic team;
};

SotoPolicy make_soto_policy(int obs_dim, int action_count, int hidden, Rng& init_rng);

}  // namespace fairmarl
