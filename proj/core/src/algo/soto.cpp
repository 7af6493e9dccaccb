#include "fairmarl/algo/soto.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "fairmarl/fairness.hpp"

namespace fairmarl {

void SotoConfig::validate() const {
  if (alpha_fairness <= 0) throw std::invalid_argument("SotoConfig: alpha_fairness must be positive");
  if (beta_proportion < 0 || beta_proportion > 1)
    throw std::invalid_argument("SotoConfig: beta_proportion must lie in [0, 1]");
  ppo.validate();
}

SotoConfig soto_ah_config(double alpha_fairness) {
  SotoConfig cfg;
  cfg.alpha_fairness = alpha_fairness;
  cfg.beta_proportion = 0.5;
  cfg.ppo.learning_rate = 1e-4;
  cfg.ppo.gamma = 0.99;
  cfg.ppo.clip_epsilon = 0.2;
  cfg.ppo.epochs = 5;
  cfg.ppo.minibatch_size = 256;
  cfg.ppo.c2 = 0.05;
  cfg.ppo.c1 = 0.5;
  return cfg;
}

SotoConfig soto_hs_config() {
  SotoConfig cfg;
  cfg.alpha_fairness = 0.9;
  cfg.beta_proportion = 0.5;
  cfg.ppo.learning_rate = 5e-4;
  cfg.ppo.gamma = 0.99;
  cfg.ppo.clip_epsilon = 0.2;
  cfg.ppo.epochs = 5;
  cfg.ppo.minibatch_size = 64;
  cfg.ppo.c2 = 0.01;
  cfg.ppo.c1 = 0.5;
  return cfg;
}

double soto_team_probability(double training_progress, const SotoConfig& cfg) {
  if (training_progress < 0 || training_progress > 1)
    throw std::invalid_argument("soto_team_probability: progress must lie in [0, 1]");
  return std::clamp(cfg.beta_proportion * training_progress * 2.0, 0.0, 1.0);
}

SotoHead soto_select_head(Rng& rng, double training_progress, const SotoConfig& cfg) {
  double p_team = soto_team_probability(training_progress, cfg);
  return rng.uniform() < p_team ? SotoHead::Team : SotoHead::Self;
}

std::map<AgentId, double> soto_welfare_weight(const std::map<AgentId, double>& utilities,
                                              const SotoConfig& cfg) {
  if (utilities.empty()) throw std::invalid_argument("soto_welfare_weight: no utilities");
  std::vector<AgentId> ids;
  std::vector<double> u;
  ids.reserve(utilities.size());
  u.reserve(utilities.size());
  for (const auto& [id, value] : utilities) {
    ids.push_back(id);
    u.push_back(value);
  }
  u = shift_positive(std::move(u));
  std::vector<double> w(u.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    w[i] = std::pow(std::max(u[i], 1e-12), -cfg.alpha_fairness);
    sum += w[i];
  }
  double mean = sum / static_cast<double>(w.size());
  std::map<AgentId, double> out;
  for (std::size_t i = 0; i < w.size(); ++i) out[ids[i]] = w[i] / mean;
  return out;
}

double soto_group_ratio_weight(double mean_non_impaired, double mean_impaired,
                               const SotoConfig& cfg) {
  std::vector<double> pair = shift_positive({mean_non_impaired, mean_impaired});
  double ratio = pair[0] / std::max(pair[1], 1e-8);
  return std::pow(ratio, cfg.alpha_fairness);
}

SotoPolicy make_soto_policy(int obs_dim, int action_count, int hidden, Rng& init_rng) {
  SotoPolicy p;
  p.self = ActorCritic(obs_dim, action_count, hidden, init_rng);
  p.team = ActorCritic(obs_dim, action_count, hidden, init_rng);
  return p;
}

}  // namespace fairmarl
