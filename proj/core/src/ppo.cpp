#include "fairmarl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fairmarl {

void PpoConfig::validate() const {
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gamma must lie in [0, 1]");
  if (gae_lambda < 0.0 || gae_lambda > 1.0) throw std::invalid_argument("gae_lambda must lie in [0, 1]");
  if (clip_epsilon <= 0.0) throw std::invalid_argument("clip_epsilon must be positive");
  if (c1 < 0.0 || c2 < 0.0) throw std::invalid_argument("loss coefficients must be non-negative");
  if (epochs < 1) throw std::invalid_argument("epochs must be positive");
  if (minibatch_size < 1) throw std::invalid_argument("minibatch_size must be positive");
  if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be positive");
}

void FairPpoConfig::validate() const {
  ppo.validate();
  penalty.validate();
  if (lambda_mode == LambdaMode::Fixed && lambda_value < 0.0) {
    throw std::invalid_argument("fixed lambda must be non-negative");
  }
  if (lambda_max < 0.0) throw std::invalid_argument("lambda_max must be non-negative");
  if (penalty_timing != "episode") {
    if (penalty_timing == "timestep") {
      throw std::invalid_argument("per-timestep penalty aggregation is not implemented");
    }
    throw std::invalid_argument("unknown penalty timing: " + penalty_timing);
  }
}

std::vector<AdvantageRecord> gae(const std::vector<double>& rewards,
                                 const std::vector<double>& values,
                                 const std::vector<double>& log_probs, double bootstrap_value,
                                 bool terminal, const PpoConfig& cfg) {
  if (rewards.size() != values.size() || rewards.size() != log_probs.size()) {
    throw std::invalid_argument("rewards, values and log_probs must have equal length");
  }
  std::size_t n = rewards.size();
  std::vector<AdvantageRecord> out(n);
  double acc = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    double next_v = (t + 1 < n) ? values[t + 1] : (terminal ? 0.0 : bootstrap_value);
    double delta = rewards[t] + cfg.gamma * next_v - values[t];
    acc = delta + cfg.gamma * cfg.gae_lambda * acc;
    out[t] = {acc, acc + values[t], log_probs[t]};
  }
  return out;
}

AdvantageBatch advantages(const TrajectoryBatch& batch,
                          const std::map<AgentId, double>& bootstrap_values,
                          const PpoConfig& cfg) {
  AdvantageBatch adv;
  for (AgentId id : batch.agent_ids()) {
    const auto& steps = batch.steps(id);
    std::vector<double> rewards, values, log_probs;
    rewards.reserve(steps.size());
    values.reserve(steps.size());
    log_probs.reserve(steps.size());
    for (const StepRecord& s : steps) {
      rewards.push_back(s.reward);
      values.push_back(s.value_estimate);
      log_probs.push_back(s.log_prob);
    }
    bool terminal = !steps.empty() && steps.back().terminal;
    double bootstrap = 0.0;
    if (!steps.empty() && !terminal) {
      auto it = bootstrap_values.find(id);
      if (it == bootstrap_values.end()) {
        throw std::invalid_argument("missing bootstrap value for agent " + std::to_string(id));
      }
      bootstrap = it->second;
    }
    adv.rows[id] = gae(rewards, values, log_probs, bootstrap, terminal, cfg);
  }
  return adv;
}

double clip_objective(double ratio, double advantage, double epsilon) {
  if (ratio <= 0.0) throw std::domain_error("probability ratio must be positive");
  double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(ratio * advantage, clipped * advantage);
}

double value_loss(double value, double target) {
  double d = value - target;
  return d * d;
}

double dynamic_lambda(double ppo_loss_magnitude, double penalty_magnitude, double lambda_max) {
  double lam = std::abs(ppo_loss_magnitude) / (penalty_magnitude + 1e-8);
  return std::clamp(lam, 0.0, lambda_max);
}

SampleBatch SampleBatch::subset(const std::vector<int>& indices) const {
  SampleBatch s;
  Eigen::Index k = static_cast<Eigen::Index>(indices.size());
  s.obs.resize(obs.rows(), k);
  s.actions.resize(indices.size());
  s.old_log_prob.resize(k);
  s.advantage.resize(k);
  s.value_target.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    int ix = indices[static_cast<std::size_t>(i)];
    s.obs.col(i) = obs.col(ix);
    s.actions[static_cast<std::size_t>(i)] = actions[static_cast<std::size_t>(ix)];
    s.old_log_prob(i) = old_log_prob(ix);
    s.advantage(i) = advantage(ix);
    s.value_target(i) = value_target(ix);
  }
  return s;
}

SampleBatch flatten(const TrajectoryBatch& batch, const AdvantageBatch& adv) {
  Eigen::Index total = 0;
  Eigen::Index dim = -1;
  for (AgentId id : batch.agent_ids()) {
    const auto& steps = batch.steps(id);
    auto it = adv.rows.find(id);
    if (it == adv.rows.end() || it->second.size() != steps.size()) {
      throw std::invalid_argument("advantage rows do not line up with the trajectory");
    }
    total += static_cast<Eigen::Index>(steps.size());
    if (!steps.empty()) dim = steps.front().observation.size();
  }
  if (total == 0) throw std::invalid_argument("cannot flatten an empty batch");
  SampleBatch out;
  out.obs.resize(dim, total);
  out.actions.resize(static_cast<std::size_t>(total));
  out.old_log_prob.resize(total);
  out.advantage.resize(total);
  out.value_target.resize(total);
  Eigen::Index col = 0;
  for (AgentId id : batch.agent_ids()) {
    const auto& steps = batch.steps(id);
    const auto& rows = adv.rows.at(id);
    for (std::size_t t = 0; t < steps.size(); ++t) {
      out.obs.col(col) = steps[t].observation;
      out.actions[static_cast<std::size_t>(col)] = steps[t].action;
      out.old_log_prob(col) = rows[t].old_log_prob;
      out.advantage(col) = rows[t].advantage;
      out.value_target(col) = rows[t].value_target;
      ++col;
    }
  }
  return out;
}

namespace {

struct PolicyStats {
  Eigen::MatrixXd p;     // probabilities, one column per sample
  Eigen::MatrixXd logp;  // log-probabilities
  Eigen::VectorXd h;     // per-sample entropy
};

PolicyStats policy_stats(const Eigen::MatrixXd& logits) {
  PolicyStats s;
  Eigen::Index a = logits.rows(), n = logits.cols();
  s.p.resize(a, n);
  s.logp.resize(a, n);
  s.h.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::ArrayXd shifted = logits.col(j).array() - logits.col(j).maxCoeff();
    double lse = std::log(shifted.exp().sum());
    s.logp.col(j) = shifted - lse;
    s.p.col(j) = s.logp.col(j).array().exp();
    s.h(j) = -(s.p.col(j).array() * s.logp.col(j).array()).sum();
  }
  return s;
}

int checked_action(const SampleBatch& batch, Eigen::Index j, Eigen::Index action_count) {
  int a = batch.actions[static_cast<std::size_t>(j)];
  if (a < 0 || a >= action_count) {
    throw std::invalid_argument("action index out of range: " + std::to_string(a));
  }
  return a;
}

}  // namespace

double ppo_loss(const ActorCritic& net, const SampleBatch& batch, const PpoConfig& cfg) {
  Eigen::Index n = batch.size();
  if (n == 0) throw std::invalid_argument("loss over an empty batch");
  PolicyStats stats = policy_stats(net.policy.forward(batch.obs));
  Eigen::MatrixXd v = net.value.forward(batch.obs);
  double clip_sum = 0.0, vf_sum = 0.0, h_sum = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    int a = checked_action(batch, j, stats.p.rows());
    double ratio = std::exp(stats.logp(a, j) - batch.old_log_prob(j));
    clip_sum += clip_objective(ratio, batch.advantage(j), cfg.clip_epsilon);
    vf_sum += value_loss(v(0, j), batch.value_target(j));
    h_sum += stats.h(j);
  }
  return (clip_sum - cfg.c1 * vf_sum + cfg.c2 * h_sum) / static_cast<double>(n);
}

double fair_ppo_loss(double ppo_loss_value, double penalty_value, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be non-negative");
  return ppo_loss_value - lambda * penalty_value;
}

double fair_ppo_loss(const ActorCritic& net, const SampleBatch& batch, const PenaltyTerm& term,
                     double lambda, const PpoConfig& cfg) {
  return fair_ppo_loss(ppo_loss(net, batch, cfg), penalty_value(net.value, term), lambda);
}

PpoGradient objective_gradient(const ActorCritic& net, const SampleBatch& batch,
                               const PpoConfig& cfg, const PenaltyTerm* term, double lambda) {
  Eigen::Index n = batch.size();
  if (n == 0) throw std::invalid_argument("gradient over an empty batch");
  PpoGradient grad{net.policy.zero_grad(), net.value.zero_grad()};
  Mlp::Cache pcache, vcache;
  PolicyStats stats = policy_stats(net.policy.forward(batch.obs, pcache));
  Eigen::MatrixXd v = net.value.forward(batch.obs, vcache);
  double inv_n = 1.0 / static_cast<double>(n);

  Eigen::MatrixXd glogits(stats.p.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    int a = checked_action(batch, j, stats.p.rows());
    double adv = batch.advantage(j);
    double ratio = std::exp(stats.logp(a, j) - batch.old_log_prob(j));
    bool flows = !((adv >= 0.0 && ratio > 1.0 + cfg.clip_epsilon) ||
                   (adv < 0.0 && ratio < 1.0 - cfg.clip_epsilon));
    double k = flows ? ratio * adv * inv_n : 0.0;
    glogits.col(j) = -k * stats.p.col(j);
    glogits(a, j) += k;
    glogits.col(j) -=
        (cfg.c2 * inv_n) * (stats.p.col(j).array() * (stats.logp.col(j).array() + stats.h(j)))
            .matrix();
  }
  net.policy.backward(pcache, glogits, grad.policy);

  Eigen::MatrixXd gvalue =
      (-2.0 * cfg.c1 * inv_n) * (v.row(0) - batch.value_target.transpose());
  net.value.backward(vcache, gvalue, grad.value);

  if (term != nullptr && lambda != 0.0) {
    accumulate_penalty_gradient(net.value, *term, lambda, grad.value);
  }
  return grad;
}

PpoLearner::PpoLearner(ActorCritic net, FairPpoConfig cfg, std::uint64_t shuffle_seed)
    : net_(std::move(net)), cfg_(std::move(cfg)), shuffle_rng_(shuffle_seed) {
  cfg_.validate();
}

UpdateStats PpoLearner::update(const SampleBatch& batch, const PenaltyTerm* term) {
  if (batch.size() == 0) throw std::invalid_argument("update on an empty batch");
  bool fair = term != nullptr && term->active();
  UpdateStats stats;
  stats.objective_before = ppo_loss(net_, batch, cfg_.ppo);
  if (fair) {
    stats.penalty = penalty_value(net_.value, *term);
    stats.lambda = cfg_.lambda_mode == LambdaMode::Fixed
                       ? cfg_.lambda_value
                       : dynamic_lambda(std::abs(stats.objective_before), stats.penalty,
                                        cfg_.lambda_max);
  }

  std::vector<int> idx(static_cast<std::size_t>(batch.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::size_t mb = static_cast<std::size_t>(cfg_.ppo.minibatch_size);

  for (int epoch = 0; epoch < cfg_.ppo.epochs; ++epoch) {
    // The penalty is one episode-level term; its gradient is refreshed once
    // per epoch and shared by every minibatch in that epoch.
    Mlp::Grad epoch_pen;
    bool has_pen = fair && stats.lambda != 0.0 && term->value_weight != 0.0;
    if (has_pen) {
      epoch_pen = net_.value.zero_grad();
      accumulate_penalty_gradient(net_.value, *term, stats.lambda, epoch_pen);
      require_finite(epoch_pen, "value");
    }
    shuffle_rng_.shuffle(idx);
    for (std::size_t start = 0; start < idx.size(); start += mb) {
      std::size_t stop = std::min(start + mb, idx.size());
      std::vector<int> sel(idx.begin() + static_cast<std::ptrdiff_t>(start),
                           idx.begin() + static_cast<std::ptrdiff_t>(stop));
      SampleBatch sub = batch.subset(sel);
      PpoGradient grad = objective_gradient(net_, sub, cfg_.ppo);
      if (has_pen) {
        for (std::size_t l = 0; l < grad.value.w.size(); ++l) {
          grad.value.w[l] += epoch_pen.w[l];
          grad.value.b[l] += epoch_pen.b[l];
        }
      }
      require_finite(grad.policy, "policy");
      require_finite(grad.value, "value");

      std::vector<TensorView> params = tensor_views(net_.policy);
      std::vector<TensorView> vparams = tensor_views(net_.value);
      params.insert(params.end(), vparams.begin(), vparams.end());
      std::vector<TensorView> grads = tensor_views(grad.policy);
      std::vector<TensorView> vgrads = tensor_views(grad.value);
      grads.insert(grads.end(), vgrads.begin(), vgrads.end());
      // Adam descends; the objective is maximized, so feed its negation.
      for (TensorView& g : grads) {
        Eigen::Map<Eigen::ArrayXd>(g.data, g.size) *= -1.0;
      }
      opt_.step(params, grads, cfg_.ppo.learning_rate);
      ++stats.minibatches;
    }
  }
  return stats;
}

}  // namespace fairmarl
