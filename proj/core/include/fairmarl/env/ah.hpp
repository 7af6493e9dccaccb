#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fairmarl/rng.hpp"
#include "fairmarl/trajectory.hpp"

namespace fairmarl {

enum class BerryColor { Red, Blue };

enum class AhAction { Up, Down, Left, Right, Eat, ChangeColor, Plant, Ripen, Block, Noop };
inline constexpr int kAhActionCount = 10;

// Validates and converts a sampled action index.
AhAction ah_action_from_index(int index);

struct AhConfig {
  int grid_width = 15;
  int grid_height = 15;
  int n_agents = 40;
  int n_bushes = 30;
  double red_fraction = 0.5;
  int berry_regrowth_ts = 3;
  int bush_lifespan_ts = 120;
  int bush_growth_rate_ts = 2;
  int episode_length_ts = 1500;
  // Impaired agents may move only on steps divisible by this period. 1 makes
  // mobility identical across groups (used by attribute-blind studies).
  int impaired_move_period = 2;
  // When false the impairment flag is zeroed in observations.
  bool observe_z = true;

  double r_eat_match = 2.0;
  double r_eat_other = 1.0;
  double r_ripen_match = 1.0;
  double r_ripen_other = 0.5;
  double r_change_from_opposing = 1.0;
  double r_change_other = 0.25;
  double r_plant = 0.5;
  double r_block_opposing = 0.5;
  double r_block_same = 0.1;

  void validate() const;
};

struct Bush {
  int cell = 0;
  BerryColor color = BerryColor::Red;
  bool has_ripe_berry = false;
  int regrowth_countdown = 0;
  int age = 0;
};

struct AhAgentState {
  int cell = 0;
  BerryColor preference = BerryColor::Red;
  int z = 0;  // 1 = impaired mobility
  int move_cooldown = 0;
  bool blocked_for_turn = false;
};

struct AhState {
  AhConfig cfg;
  int step_index = 0;
  std::vector<AhAgentState> agents;  // index is the agent id
  std::map<int, Bush> bushes;        // keyed by cell index
  Rng env_rng{0};

  int cell_index(int x, int y) const { return y * cfg.grid_width + x; }
  bool in_bounds(int x, int y) const {
    return x >= 0 && x < cfg.grid_width && y >= 0 && y < cfg.grid_height;
  }
};

AhState ah_reset(const AhConfig& cfg, std::uint64_t seed);

int ah_observation_dim();
Eigen::VectorXd ah_observe(const AhState& state, AgentId agent);

// Applies one synchronous step: blocks, then movement, then bush
// interactions, then bush dynamics. Requires one action per agent.
std::map<AgentId, double> ah_step(AhState& state, const std::map<AgentId, AhAction>& actions);

// Two states sharing every random draw, differing only in flipped impairment
// flags; drive both with common action noise for paired rollouts.
std::pair<AhState, AhState> ah_counterfactual_pair(const AhConfig& cfg, std::uint64_t seed);

struct AhCensus {
  int red_bushes = 0;
  int blue_bushes = 0;
  int ripe_berries = 0;
};
AhCensus ah_census(const AhState& state);

// Group labels for fairness accounting: z from the impairment flag, lf from
// the berry preference (red=0, blue=1).
std::vector<AgentProfile> ah_profiles(const AhState& state);

// Returns an empty string when the state is consistent, else a description
// of the first violated structural rule.
std::string ah_invariant_violation(const AhState& state);

}  // namespace fairmarl
