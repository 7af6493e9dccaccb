#include "fairmarl/algo/fen.hpp"

#include <cmath>
#include <stdexcept>

namespace fairmarl {

void FenConfig::validate() const {
  if (k_sub < 2) throw std::invalid_argument("FenConfig: k_sub must be >= 2");
  if (t_macro < 1) throw std::invalid_argument("FenConfig: t_macro must be >= 1");
  if (reward_scale_c <= 0) throw std::invalid_argument("FenConfig: reward_scale_c must be positive");
  if (fairness_epsilon <= 0) throw std::invalid_argument("FenConfig: fairness_epsilon must be positive");
  ppo.validate();
}

FenConfig fen_ah_config() {
  FenConfig cfg;
  cfg.k_sub = 2;
  cfg.t_macro = 10;
  cfg.reward_scale_c = 1.0;
  cfg.fairness_epsilon = 1e-6;
  cfg.ppo.learning_rate = 1e-4;
  cfg.ppo.gamma = 0.99;
  cfg.ppo.clip_epsilon = 0.1;
  cfg.ppo.epochs = 5;
  cfg.ppo.minibatch_size = 256;
  cfg.ppo.c2 = 0.01;
  cfg.ppo.c1 = 0.5;
  return cfg;
}

FenConfig fen_hs_config() {
  FenConfig cfg;
  cfg.k_sub = 4;
  cfg.t_macro = 50;
  cfg.reward_scale_c = 100.0;
  cfg.fairness_epsilon = 0.1;
  cfg.ppo.learning_rate = 1e-5;
  cfg.ppo.gamma = 0.99;
  cfg.ppo.clip_epsilon = 0.1;
  cfg.ppo.epochs = 10;
  cfg.ppo.minibatch_size = 64;
  cfg.ppo.c2 = 0.01;
  cfg.ppo.c1 = 0.5;
  return cfg;
}

double fen_fair_efficient_reward(double own_utility, double mean_utility, const FenConfig& cfg) {
  double mean = std::max(mean_utility, cfg.fairness_epsilon);
  double deviation = std::abs(own_utility / mean - 1.0);
  return (mean / cfg.reward_scale_c) / (cfg.fairness_epsilon + deviation);
}

FenStack make_fen_stack(int obs_dim, int action_count, int hidden, const FenConfig& cfg,
                        Rng& init_rng) {
  cfg.validate();
  FenStack stack;
  stack.controller = ActorCritic(obs_dim, cfg.k_sub, hidden, init_rng);
  stack.subs.reserve(static_cast<std::size_t>(cfg.k_sub));
  for (int i = 0; i < cfg.k_sub; ++i)
    stack.subs.emplace_back(obs_dim, action_count, hidden, init_rng);
  return stack;
}

FenControllerStep fen_controller_step(const ActorCritic& controller, const Eigen::VectorXd& obs,
                                      int step_count, int prev_sub, const FenConfig& cfg,
                                      Rng& rng) {
  if (step_count < 0) throw std::invalid_argument("fen_controller_step: negative step count");
  FenControllerStep out;
  if (step_count % cfg.t_macro != 0) {
    if (prev_sub < 0 || prev_sub >= cfg.k_sub)
      throw std::invalid_argument("fen_controller_step: prev_sub out of range");
    out.sub_policy = prev_sub;
    return out;
  }
  ActionSample s = sample_action(controller, obs, rng);
  out.sub_policy = s.action;
  out.decided = true;
  out.log_prob = s.log_prob;
  out.value = s.value;
  return out;
}

}  // namespace fairmarl
