#pragma once

#include <Eigen/Core>
#include <vector>

#include "fairmarl/net.hpp"
#include "fairmarl/ppo.hpp"
#include "fairmarl/rng.hpp"

namespace fairmarl {

// Hierarchical controller-over-sub-policies baseline. The controller picks a
// sub-policy every t_macro steps and is rewarded with the fair-efficient
// signal; sub-policy 0 chases raw environment reward, the others train on the
// fair-efficient signal and their entropy bonus.
struct FenConfig {
  int k_sub = 2;
  int t_macro = 10;
  double reward_scale_c = 1.0;
  double fairness_epsilon = 1e-6;
  PpoConfig ppo;

  void validate() const;
};

FenConfig fen_ah_config();
FenConfig fen_hs_config();

// (mean/c) / (eps + |own/mean - 1|), with the mean floored at eps. Peaks when
// the agent's utility sits exactly on the population mean.
double fen_fair_efficient_reward(double own_utility, double mean_utility, const FenConfig& cfg);

// One controller plus k_sub sub-policies over a shared observation space.
struct FenStack {
  ActorCritic controller;
  std::vector<ActorCritic> subs;
};

FenStack make_fen_stack(int obs_dim, int action_count, int hidden, const FenConfig& cfg,
                        Rng& init_rng);

// Macro-decision step. A fresh sub-policy index is sampled from the controller
// only when step_count falls on a macro boundary; otherwise prev_sub persists.
struct FenControllerStep {
  int sub_policy = 0;
  bool decided = false;
  double log_prob = 0.0;  // controller log-prob, set when decided
  double value = 0.0;     // controller value estimate, set when decided
};

FenControllerStep fen_controller_step(const ActorCritic& controller, const Eigen::VectorXd& obs,
                                      int step_count, int prev_sub, const FenConfig& cfg,
                                      Rng& rng);

}  // namespace fairmarl
