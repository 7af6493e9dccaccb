#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fairmarl/fair_penalty.hpp"
#include "fairmarl/net.hpp"
#include "fairmarl/rng.hpp"
#include "fairmarl/trajectory.hpp"

namespace fairmarl {

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_epsilon = 0.2;
  double c1 = 0.5;
  double c2 = 0.01;
  int epochs = 4;
  int minibatch_size = 64;
  double learning_rate = 3e-4;

  void validate() const;
};

enum class LambdaMode { Fixed, Dynamic };

struct FairPpoConfig {
  PpoConfig ppo;
  PenaltySpec penalty;
  LambdaMode lambda_mode = LambdaMode::Dynamic;
  double lambda_value = 0.0;  // used when lambda_mode == Fixed
  double lambda_max = 10.0;   // cap for the dynamic balance
  // Penalties are aggregated per episode. "timestep" is reserved and rejected.
  std::string penalty_timing = "episode";

  bool penalty_disabled() const { return penalty.alpha == 0.0 && penalty.beta == 0.0; }
  void validate() const;
};

struct AdvantageRecord {
  double advantage = 0.0;
  double value_target = 0.0;
  double old_log_prob = 0.0;
};

struct AdvantageBatch {
  std::map<AgentId, std::vector<AdvantageRecord>> rows;
};

// Generalized advantage estimation over one reward/value sequence.
// bootstrap_value is V(s_T) for a sequence cut off before termination and is
// ignored when terminal is true.
std::vector<AdvantageRecord> gae(const std::vector<double>& rewards,
                                 const std::vector<double>& values,
                                 const std::vector<double>& log_probs, double bootstrap_value,
                                 bool terminal, const PpoConfig& cfg);

// Runs gae over every agent sequence in the batch. Agents whose sequence does
// not end in a terminal step must appear in bootstrap_values.
AdvantageBatch advantages(const TrajectoryBatch& batch,
                          const std::map<AgentId, double>& bootstrap_values,
                          const PpoConfig& cfg);

// min(ratio*adv, clip(ratio, 1-eps, 1+eps)*adv). ratio must be positive.
double clip_objective(double ratio, double advantage, double epsilon);

// Squared error of one value prediction.
double value_loss(double value, double target);

// |ppo_loss| / (penalty + 1e-8), clipped to [0, lambda_max].
double dynamic_lambda(double ppo_loss_magnitude, double penalty_magnitude,
                      double lambda_max = 10.0);

// Flattened update batch; samples are columns, in a deterministic
// (agent id, step) order.
struct SampleBatch {
  Eigen::MatrixXd obs;           // (obs_dim, N)
  std::vector<int> actions;      // N
  Eigen::VectorXd old_log_prob;  // N
  Eigen::VectorXd advantage;     // N
  Eigen::VectorXd value_target;  // N

  Eigen::Index size() const { return obs.cols(); }
  SampleBatch subset(const std::vector<int>& indices) const;
};

SampleBatch flatten(const TrajectoryBatch& batch, const AdvantageBatch& adv);

// Mean over the batch of [clip term - c1*(V - G)^2 + c2*entropy]. This is a
// maximization objective; the optimizer descends its negation.
double ppo_loss(const ActorCritic& net, const SampleBatch& batch, const PpoConfig& cfg);

// ppo_loss - lambda * penalty for an already-evaluated penalty scalar.
double fair_ppo_loss(double ppo_loss_value, double penalty_value, double lambda);

// Penalised objective with the value component live: ppo_loss(theta) -
// lambda * penalty(theta). This is the function objective_gradient
// differentiates.
double fair_ppo_loss(const ActorCritic& net, const SampleBatch& batch, const PenaltyTerm& term,
                     double lambda, const PpoConfig& cfg);

struct PpoGradient {
  Mlp::Grad policy;
  Mlp::Grad value;
};

// Analytic gradient of the (optionally penalised) maximization objective.
// At a clip kink the unclipped branch is taken. term may be null.
PpoGradient objective_gradient(const ActorCritic& net, const SampleBatch& batch,
                               const PpoConfig& cfg, const PenaltyTerm* term = nullptr,
                               double lambda = 0.0);

struct UpdateStats {
  double objective_before = 0.0;  // full-batch ppo_loss at the old parameters
  double penalty = 0.0;
  double lambda = 0.0;
  int minibatches = 0;
};

// Minibatched multi-epoch update of one actor-critic pair. With a null or
// inactive penalty term the update is exactly plain clipped-surrogate
// optimization; the penalised path adds the same term to every minibatch,
// refreshing its gradient once per epoch.
class PpoLearner {
 public:
  PpoLearner(ActorCritic net, FairPpoConfig cfg, std::uint64_t shuffle_seed);

  UpdateStats update(const SampleBatch& batch, const PenaltyTerm* term = nullptr);

  ActorCritic& net() { return net_; }
  const ActorCritic& net() const { return net_; }
  const FairPpoConfig& config() const { return cfg_; }

 private:
  ActorCritic net_;
  FairPpoConfig cfg_;
  Adam opt_;
  Rng shuffle_rng_;
};

}  // namespace fairmarl
