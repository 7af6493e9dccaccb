#pragma once

#include <Eigen/Dense>
#include <map>
#include <vector>

#include "fairmarl/fairness.hpp"
#include "fairmarl/net.hpp"
#include "fairmarl/trajectory.hpp"

namespace fairmarl {

// One |side_a - side_b| term of the value-estimate penalty component. A side
// is the mean value estimate over its observation columns, or a precomputed
// constant when its matrix is empty (used when the other group's states are
// scored by a different network, so no gradient flows through that side).
struct ValueContrast {
  Eigen::MatrixXd obs_a;
  double const_a = 0.0;
  Eigen::MatrixXd obs_b;
  double const_b = 0.0;
};

// The per-episode fairness penalty in the form the optimizer consumes:
//   penalty(theta) = constant_part + value_weight * sum_k |meanV(A_k) - meanV(B_k)|
// constant_part carries the realized-return component (alpha, normalized),
// which does not depend on theta; value_weight carries beta divided by the
// running value-component normalizer, so the sum above is differentiated
// through the value network at update time.
struct PenaltyTerm {
  double constant_part = 0.0;
  double value_weight = 0.0;
  std::vector<ValueContrast> contrasts;

  bool active() const { return constant_part != 0.0 || value_weight != 0.0; }
};

// sum_k |meanV(A_k) - meanV(B_k)| at the current value network.
double raw_value_part(const Mlp& value_net, const std::vector<ValueContrast>& contrasts);

// Full penalty value at the current parameters.
double penalty_value(const Mlp& value_net, const PenaltyTerm& term);

// Adds d(-lambda * penalty)/d(theta_value) for the ascent direction of the
// penalised objective into grad.
void accumulate_penalty_gradient(const Mlp& value_net, const PenaltyTerm& term, double lambda,
                                 Mlp::Grad& grad);

// Raw (unnormalized, unweighted) episode ingredients for one penalty:
// the realized-return disparity and the state groups for the value component.
struct PenaltyInputs {
  double raw_return_part = 0.0;
  std::vector<ValueContrast> contrasts;
};

// Builders for environments whose fairness groups are the learning agents
// themselves. Returns are undiscounted episode totals.
PenaltyInputs dp_penalty_inputs(const TrajectoryBatch& batch, const GroupPartition& partition);
// Skips lf levels with an empty subgroup on both the return and value sides.
PenaltyInputs csp_penalty_inputs(const TrajectoryBatch& batch, const GroupPartition& partition);
// Factual and counterfactual batches must cover the same agents.
PenaltyInputs cf_penalty_inputs(const TrajectoryBatch& factual,
                                const TrajectoryBatch& counterfactual);

// Normalizes both components by their running maxima, applies alpha and beta,
// and packages the result. Consumes the contrast matrices.
PenaltyTerm assemble_penalty(PenaltyInputs inputs, const PenaltySpec& spec,
                             PenaltyNormalizer& normalizer, const Mlp& value_net);

// Split-learner layout: one network per group, each contrast side tagged with
// the network that scores it (0 = non-sensitive learner, 1 = sensitive).
struct LabeledContrast {
  Eigen::MatrixXd obs_a;
  int net_a = 0;
  Eigen::MatrixXd obs_b;
  int net_b = 0;
};

struct GroupPenaltyInputs {
  double raw_return_part = 0.0;
  std::vector<LabeledContrast> contrasts;
};

GroupPenaltyInputs group_dp_penalty_inputs(const TrajectoryBatch& batch,
                                           const GroupPartition& partition);
GroupPenaltyInputs group_csp_penalty_inputs(const TrajectoryBatch& batch,
                                            const GroupPartition& partition);
// factual_z gives each agent's group in the factual episode; the paired
// counterfactual states are scored by the opposite group's network.
GroupPenaltyInputs group_cf_penalty_inputs(const TrajectoryBatch& factual,
                                           const TrajectoryBatch& counterfactual,
                                           const std::map<AgentId, int>& factual_z);

// The same centrally assembled penalty, projected onto each learner: sides
// owned by the learner's network stay live, the other network's sides are
// frozen to their current mean value estimates. Both terms evaluate to the
// same number at assembly time.
struct GroupPenaltyTerms {
  PenaltyTerm net0;
  PenaltyTerm net1;
  double value = 0.0;
};

// Advances the shared normalizer exactly once. Inactive terms (and an
// untouched normalizer) when alpha = beta = 0.
GroupPenaltyTerms assemble_group_penalty(GroupPenaltyInputs inputs, const PenaltySpec& spec,
                                         PenaltyNormalizer& normalizer, const Mlp& value_net0,
                                         const Mlp& value_net1);

}  // namespace fairmarl
