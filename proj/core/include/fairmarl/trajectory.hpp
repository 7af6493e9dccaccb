#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

namespace fairmarl {

using AgentId = int;

// One agent's static identity: sensitive attribute z, legitimate factor,
// and the size of its discrete action space.
struct AgentProfile {
  AgentId id = 0;
  int z = 0;        // binary sensitive attribute
  int lf = 0;       // legitimate-factor value (berry color, patient priority, ...)
  int action_count = 1;
};

// One environment transition as seen by a single agent.
struct StepRecord {
  Eigen::VectorXd observation;
  int action = 0;
  double log_prob = 0.0;
  double reward = 0.0;
  double value_estimate = 0.0;
  bool terminal = false;
};

// Per-agent step sequences for one episode. A sequence stops at its first
// terminal flag; all sequences are bounded by the episode length T.
class TrajectoryBatch {
 public:
  TrajectoryBatch() = default;
  explicit TrajectoryBatch(int episode_length) : episode_length_(episode_length) {}

  void add_agent(AgentId id);
  void push_step(AgentId id, StepRecord step);

  bool has_agent(AgentId id) const { return steps_.count(id) > 0; }
  const std::vector<StepRecord>& steps(AgentId id) const;
  std::vector<AgentId> agent_ids() const;
  int episode_length() const { return episode_length_; }

 private:
  int episode_length_ = 0;
  std::map<AgentId, std::vector<StepRecord>> steps_;
};

// Agent ids split by sensitive attribute and by legitimate-factor value.
struct GroupPartition {
  std::set<AgentId> sensitive;       // z = 1
  std::set<AgentId> non_sensitive;   // z = 0
  std::map<int, std::set<AgentId>> by_lf;
};

// Sum of rewards over the agent's recorded steps (undiscounted G_i).
double total_return(const TrajectoryBatch& batch, AgentId agent);

// Suffix sums with discount: out[t] = sum_k gamma^(k-t) rewards[k].
std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma);

// Mean of total returns over a non-empty group.
double group_mean_return(const TrajectoryBatch& batch, const std::set<AgentId>& group);

// Mean of a per-agent value map over a non-empty group.
double group_mean(const std::map<AgentId, double>& per_agent, const std::set<AgentId>& group);

// Split a population by z and by lf. Rejects duplicate ids and empty input.
GroupPartition partition(const std::vector<AgentProfile>& profiles);

}  // namespace fairmarl
