#include "fairmarl/fair_penalty.hpp"

#include <cmath>
#include <stdexcept>

namespace fairmarl {

namespace {

double mean_value(const Mlp& value_net, const Eigen::MatrixXd& obs) {
  if (obs.cols() == 0) throw std::invalid_argument("empty observation group in penalty term");
  return value_net.forward(obs).row(0).mean();
}

Eigen::MatrixXd stack_observations(const TrajectoryBatch& batch, const std::set<AgentId>& group) {
  Eigen::Index total = 0;
  Eigen::Index dim = -1;
  for (AgentId id : group) {
    const auto& steps = batch.steps(id);
    total += static_cast<Eigen::Index>(steps.size());
    if (!steps.empty()) dim = steps.front().observation.size();
  }
  if (total == 0 || dim < 0) throw std::invalid_argument("no recorded states for a penalty group");
  Eigen::MatrixXd out(dim, total);
  Eigen::Index col = 0;
  for (AgentId id : group) {
    for (const StepRecord& s : batch.steps(id)) out.col(col++) = s.observation;
  }
  return out;
}

std::map<AgentId, double> episode_returns(const TrajectoryBatch& batch) {
  std::map<AgentId, double> g;
  for (AgentId id : batch.agent_ids()) g[id] = total_return(batch, id);
  return g;
}

}  // namespace

double raw_value_part(const Mlp& value_net, const std::vector<ValueContrast>& contrasts) {
  double sum = 0.0;
  for (const ValueContrast& c : contrasts) {
    double a = c.obs_a.cols() > 0 ? mean_value(value_net, c.obs_a) : c.const_a;
    double b = c.obs_b.cols() > 0 ? mean_value(value_net, c.obs_b) : c.const_b;
    sum += std::abs(a - b);
  }
  return sum;
}

double penalty_value(const Mlp& value_net, const PenaltyTerm& term) {
  double v = term.constant_part;
  if (term.value_weight != 0.0) v += term.value_weight * raw_value_part(value_net, term.contrasts);
  return v;
}

void accumulate_penalty_gradient(const Mlp& value_net, const PenaltyTerm& term, double lambda,
                                 Mlp::Grad& grad) {
  if (lambda == 0.0 || term.value_weight == 0.0) return;
  for (const ValueContrast& c : term.contrasts) {
    Mlp::Cache cache_a, cache_b;
    double ma = c.obs_a.cols() > 0 ? value_net.forward(c.obs_a, cache_a).row(0).mean() : c.const_a;
    double mb = c.obs_b.cols() > 0 ? value_net.forward(c.obs_b, cache_b).row(0).mean() : c.const_b;
    double diff = ma - mb;
    if (diff == 0.0) continue;  // |x| has subgradient 0 at the origin
    double s = diff > 0.0 ? 1.0 : -1.0;
    // Objective term is -lambda * w * |ma - mb|.
    if (c.obs_a.cols() > 0) {
      double ka = -lambda * term.value_weight * s / static_cast<double>(c.obs_a.cols());
      value_net.backward(cache_a, Eigen::MatrixXd::Constant(1, c.obs_a.cols(), ka), grad);
    }
    if (c.obs_b.cols() > 0) {
      double kb = lambda * term.value_weight * s / static_cast<double>(c.obs_b.cols());
      value_net.backward(cache_b, Eigen::MatrixXd::Constant(1, c.obs_b.cols(), kb), grad);
    }
  }
}

PenaltyInputs dp_penalty_inputs(const TrajectoryBatch& batch, const GroupPartition& partition) {
  PenaltyInputs in;
  in.raw_return_part = demographic_disparity(episode_returns(batch), partition);
  ValueContrast c;
  c.obs_a = stack_observations(batch, partition.sensitive);
  c.obs_b = stack_observations(batch, partition.non_sensitive);
  in.contrasts.push_back(std::move(c));
  return in;
}

PenaltyInputs csp_penalty_inputs(const TrajectoryBatch& batch, const GroupPartition& partition) {
  PenaltyInputs in;
  in.raw_return_part = conditional_statistical_disparity(episode_returns(batch), partition).total;
  for (const auto& [lf, members] : partition.by_lf) {
    std::set<AgentId> s1, s0;
    for (AgentId id : members) {
      if (partition.sensitive.count(id)) s1.insert(id);
      if (partition.non_sensitive.count(id)) s0.insert(id);
    }
    if (s1.empty() || s0.empty()) continue;
    ValueContrast c;
    c.obs_a = stack_observations(batch, s1);
    c.obs_b = stack_observations(batch, s0);
    in.contrasts.push_back(std::move(c));
  }
  return in;
}

PenaltyInputs cf_penalty_inputs(const TrajectoryBatch& factual,
                                const TrajectoryBatch& counterfactual) {
  PenaltyInputs in;
  in.raw_return_part =
      counterfactual_disparity(episode_returns(factual), episode_returns(counterfactual));
  for (AgentId id : factual.agent_ids()) {
    ValueContrast c;
    c.obs_a = stack_observations(factual, {id});
    c.obs_b = stack_observations(counterfactual, {id});
    in.contrasts.push_back(std::move(c));
  }
  return in;
}

GroupPenaltyInputs group_dp_penalty_inputs(const TrajectoryBatch& batch,
                                           const GroupPartition& partition) {
  GroupPenaltyInputs in;
  in.raw_return_part = demographic_disparity(episode_returns(batch), partition);
  LabeledContrast c;
  c.obs_a = stack_observations(batch, partition.sensitive);
  c.net_a = 1;
  c.obs_b = stack_observations(batch, partition.non_sensitive);
  c.net_b = 0;
  in.contrasts.push_back(std::move(c));
  return in;
}

GroupPenaltyInputs group_csp_penalty_inputs(const TrajectoryBatch& batch,
                                            const GroupPartition& partition) {
  GroupPenaltyInputs in;
  in.raw_return_part = conditional_statistical_disparity(episode_returns(batch), partition).total;
  for (const auto& [lf, members] : partition.by_lf) {
    std::set<AgentId> s1, s0;
    for (AgentId id : members) {
      if (partition.sensitive.count(id)) s1.insert(id);
      if (partition.non_sensitive.count(id)) s0.insert(id);
    }
    if (s1.empty() || s0.empty()) continue;
    LabeledContrast c;
    c.obs_a = stack_observations(batch, s1);
    c.net_a = 1;
    c.obs_b = stack_observations(batch, s0);
    c.net_b = 0;
    in.contrasts.push_back(std::move(c));
  }
  return in;
}

GroupPenaltyInputs group_cf_penalty_inputs(const TrajectoryBatch& factual,
                                           const TrajectoryBatch& counterfactual,
                                           const std::map<AgentId, int>& factual_z) {
  GroupPenaltyInputs in;
  in.raw_return_part =
      counterfactual_disparity(episode_returns(factual), episode_returns(counterfactual));
  for (AgentId id : factual.agent_ids()) {
    auto it = factual_z.find(id);
    if (it == factual_z.end())
      throw std::invalid_argument("agent missing from the factual group map");
    LabeledContrast c;
    c.obs_a = stack_observations(factual, {id});
    c.net_a = it->second;
    c.obs_b = stack_observations(counterfactual, {id});
    c.net_b = 1 - it->second;
    in.contrasts.push_back(std::move(c));
  }
  return in;
}

GroupPenaltyTerms assemble_group_penalty(GroupPenaltyInputs inputs, const PenaltySpec& spec,
                                         PenaltyNormalizer& normalizer, const Mlp& value_net0,
                                         const Mlp& value_net1) {
  spec.validate();
  GroupPenaltyTerms out;
  if (spec.alpha == 0.0 && spec.beta == 0.0) return out;
  const Mlp* nets[2] = {&value_net0, &value_net1};
  std::vector<std::pair<double, double>> side_means;
  double raw_val = 0.0;
  if (spec.beta != 0.0) {
    side_means.reserve(inputs.contrasts.size());
    for (const LabeledContrast& c : inputs.contrasts) {
      double ma = mean_value(*nets[c.net_a], c.obs_a);
      double mb = mean_value(*nets[c.net_b], c.obs_b);
      side_means.emplace_back(ma, mb);
      raw_val += std::abs(ma - mb);
    }
  }
  auto [norm_ret, norm_val] = normalizer.normalize(inputs.raw_return_part, raw_val);
  double constant = spec.alpha * norm_ret;
  out.net0.constant_part = constant;
  out.net1.constant_part = constant;
  out.value = constant;
  if (spec.beta != 0.0) {
    double w = spec.beta / normalizer.value_scale();
    out.net0.value_weight = w;
    out.net1.value_weight = w;
    out.value += w * raw_val;
    for (std::size_t k = 0; k < inputs.contrasts.size(); ++k) {
      const LabeledContrast& c = inputs.contrasts[k];
      for (int learner = 0; learner < 2; ++learner) {
        ValueContrast vc;
        if (c.net_a == learner) {
          vc.obs_a = c.obs_a;
        } else {
          vc.const_a = side_means[k].first;
        }
        if (c.net_b == learner) {
          vc.obs_b = c.obs_b;
        } else {
          vc.const_b = side_means[k].second;
        }
        (learner == 0 ? out.net0 : out.net1).contrasts.push_back(std::move(vc));
      }
    }
  }
  (void)norm_val;
  return out;
}

PenaltyTerm assemble_penalty(PenaltyInputs inputs, const PenaltySpec& spec,
                             PenaltyNormalizer& normalizer, const Mlp& value_net) {
  spec.validate();
  PenaltyTerm term;
  if (spec.alpha == 0.0 && spec.beta == 0.0) return term;
  double raw_ret = inputs.raw_return_part;
  double raw_val = spec.beta != 0.0 ? raw_value_part(value_net, inputs.contrasts) : 0.0;
  auto [norm_ret, norm_val] = normalizer.normalize(raw_ret, raw_val);
  term.constant_part = spec.alpha * norm_ret;
  if (spec.beta != 0.0) {
    term.value_weight = spec.beta / normalizer.value_scale();
    term.contrasts = std::move(inputs.contrasts);
  }
  (void)norm_val;
  return term;
}

}  // namespace fairmarl
