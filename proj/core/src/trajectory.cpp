#include "fairmarl/trajectory.hpp"

#include <stdexcept>

namespace fairmarl {

void TrajectoryBatch::add_agent(AgentId id) {
  steps_[id];  // creates an empty sequence if absent
}

void TrajectoryBatch::push_step(AgentId id, StepRecord step) {
  auto& seq = steps_[id];
  if (episode_length_ > 0 && static_cast<int>(seq.size()) >= episode_length_) {
    throw std::length_error("trajectory exceeds episode length");
  }
  if (!seq.empty() && seq.back().terminal) {
    throw std::logic_error("cannot append past a terminal step");
  }
  seq.push_back(std::move(step));
}

const std::vector<StepRecord>& TrajectoryBatch::steps(AgentId id) const {
  auto it = steps_.find(id);
  if (it == steps_.end()) throw std::out_of_range("unknown agent id in trajectory batch");
  return it->second;
}

std::vector<AgentId> TrajectoryBatch::agent_ids() const {
  std::vector<AgentId> ids;
  ids.reserve(steps_.size());
  for (const auto& [id, _] : steps_) ids.push_back(id);
  return ids;
}

double total_return(const TrajectoryBatch& batch, AgentId agent) {
  double sum = 0.0;
  for (const StepRecord& s : batch.steps(agent)) sum += s.reward;
  return sum;
}

std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma) {
  if (gamma < 0.0 || gamma > 1.0) {
    throw std::invalid_argument("gamma must lie in [0, 1]");
  }
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc = rewards[i] + gamma * acc;
    out[i] = acc;
  }
  return out;
}

double group_mean_return(const TrajectoryBatch& batch, const std::set<AgentId>& group) {
  if (group.empty()) throw std::invalid_argument("group mean over an empty group");
  double sum = 0.0;
  for (AgentId id : group) sum += total_return(batch, id);
  return sum / static_cast<double>(group.size());
}

double group_mean(const std::map<AgentId, double>& per_agent, const std::set<AgentId>& group) {
  if (group.empty()) throw std::invalid_argument("group mean over an empty group");
  double sum = 0.0;
  for (AgentId id : group) {
    auto it = per_agent.find(id);
    if (it == per_agent.end()) throw std::out_of_range("agent missing from value map");
    sum += it->second;
  }
  return sum / static_cast<double>(group.size());
}

GroupPartition partition(const std::vector<AgentProfile>& profiles) {
  if (profiles.empty()) throw std::invalid_argument("cannot partition an empty population");
  GroupPartition p;
  for (const AgentProfile& a : profiles) {
    if (a.z != 0 && a.z != 1) throw std::invalid_argument("sensitive attribute must be 0 or 1");
    bool inserted = (a.z == 1 ? p.sensitive : p.non_sensitive).insert(a.id).second;
    if (!inserted || (a.z == 1 ? p.non_sensitive : p.sensitive).count(a.id)) {
      throw std::invalid_argument("duplicate agent id in population");
    }
    p.by_lf[a.lf].insert(a.id);
  }
  return p;
}

}  // namespace fairmarl
