#include "fairmarl/env/ah.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fairmarl {

AhAction ah_action_from_index(int index) {
  if (index < 0 || index >= kAhActionCount) {
    throw std::invalid_argument("action index out of range: " + std::to_string(index));
  }
  return static_cast<AhAction>(index);
}

void AhConfig::validate() const {
  if (grid_width <= 0 || grid_height <= 0) throw std::invalid_argument("grid must be non-empty");
  if (n_agents <= 0 || n_agents % 2 != 0) {
    throw std::invalid_argument("n_agents must be a positive even integer");
  }
  if (n_agents > grid_width * grid_height) {
    throw std::invalid_argument("more agents than grid cells");
  }
  if (n_bushes <= 0 || n_bushes > grid_width * grid_height) {
    throw std::invalid_argument("n_bushes must fit on the grid");
  }
  if (red_fraction < 0.0 || red_fraction > 1.0) {
    throw std::invalid_argument("red_fraction must lie in [0, 1]");
  }
  if (berry_regrowth_ts < 1 || bush_lifespan_ts < 1 || bush_growth_rate_ts < 1) {
    throw std::invalid_argument("bush timing parameters must be positive");
  }
  if (episode_length_ts < 1) throw std::invalid_argument("episode_length_ts must be positive");
  if (impaired_move_period < 1) throw std::invalid_argument("impaired_move_period must be positive");
}

namespace {

// First n entries of a full Fisher-Yates pass over all cell indices.
std::vector<int> distinct_cells(int cell_count, int n, Rng& rng) {
  std::vector<int> cells(static_cast<std::size_t>(cell_count));
  std::iota(cells.begin(), cells.end(), 0);
  rng.shuffle(cells);
  cells.resize(static_cast<std::size_t>(n));
  return cells;
}

int agent_at(const AhState& s, int cell) {
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    if (s.agents[i].cell == cell) return static_cast<int>(i);
  }
  return -1;
}

bool may_move(const AhState& s, const AhAgentState& a) {
  return a.z == 0 || (s.step_index % s.cfg.impaired_move_period) == 0;
}

int cooldown_of(const AhState& s, const AhAgentState& a) {
  return a.z == 0 ? 0 : s.step_index % s.cfg.impaired_move_period;
}

}  // namespace

AhState ah_reset(const AhConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  AhState s;
  s.cfg = cfg;
  s.env_rng = Rng(substream_seed(seed, "ah.dynamics"));
  Rng init(substream_seed(seed, "ah.init"));
  int cells = cfg.grid_width * cfg.grid_height;

  std::vector<int> agent_cells = distinct_cells(cells, cfg.n_agents, init);
  int n_red = static_cast<int>(std::lround(cfg.red_fraction * cfg.n_agents));
  struct Label {
    BerryColor pref;
    int z;
  };
  std::vector<Label> labels;
  labels.reserve(static_cast<std::size_t>(cfg.n_agents));
  for (int g = 0; g < 2; ++g) {
    BerryColor pref = g == 0 ? BerryColor::Red : BerryColor::Blue;
    int size = g == 0 ? n_red : cfg.n_agents - n_red;
    int impaired = size / 2;
    for (int i = 0; i < size; ++i) labels.push_back({pref, i < impaired ? 1 : 0});
  }
  init.shuffle(labels);
  s.agents.resize(static_cast<std::size_t>(cfg.n_agents));
  for (int i = 0; i < cfg.n_agents; ++i) {
    AhAgentState& a = s.agents[static_cast<std::size_t>(i)];
    a.cell = agent_cells[static_cast<std::size_t>(i)];
    a.preference = labels[static_cast<std::size_t>(i)].pref;
    a.z = labels[static_cast<std::size_t>(i)].z;
    a.move_cooldown = 0;
    a.blocked_for_turn = false;
  }

  std::vector<int> bush_cells = distinct_cells(cells, cfg.n_bushes, init);
  int red_bushes = (cfg.n_bushes + 1) / 2;
  for (int i = 0; i < cfg.n_bushes; ++i) {
    Bush b;
    b.cell = bush_cells[static_cast<std::size_t>(i)];
    b.color = i < red_bushes ? BerryColor::Red : BerryColor::Blue;
    b.has_ripe_berry = true;
    b.regrowth_countdown = 0;
    b.age = 0;
    s.bushes[b.cell] = b;
  }
  return s;
}

int ah_observation_dim() { return 25 * 4 + 5; }

Eigen::VectorXd ah_observe(const AhState& s, AgentId agent) {
  if (agent < 0 || agent >= static_cast<int>(s.agents.size())) {
    throw std::out_of_range("no agent with id " + std::to_string(agent));
  }
  const AhAgentState& me = s.agents[static_cast<std::size_t>(agent)];
  int mx = me.cell % s.cfg.grid_width;
  int my = me.cell / s.cfg.grid_width;
  Eigen::VectorXd obs(ah_observation_dim());
  int k = 0;
  for (int dy = -2; dy <= 2; ++dy) {
    for (int dx = -2; dx <= 2; ++dx) {
      int x = mx + dx, y = my + dy;
      if (!s.in_bounds(x, y)) {
        obs(k) = obs(k + 1) = obs(k + 2) = obs(k + 3) = -1.0;
      } else {
        int cell = s.cell_index(x, y);
        auto it = s.bushes.find(cell);
        obs(k) = (it != s.bushes.end() && it->second.color == BerryColor::Red) ? 1.0 : 0.0;
        obs(k + 1) = (it != s.bushes.end() && it->second.color == BerryColor::Blue) ? 1.0 : 0.0;
        obs(k + 2) = (it != s.bushes.end() && it->second.has_ripe_berry) ? 1.0 : 0.0;
        obs(k + 3) = agent_at(s, cell) >= 0 ? 1.0 : 0.0;
      }
      k += 4;
    }
  }
  AhCensus census = ah_census(s);
  double cells = static_cast<double>(s.cfg.grid_width * s.cfg.grid_height);
  obs(k++) = me.preference == BerryColor::Red ? 1.0 : 0.0;
  obs(k++) = s.cfg.observe_z ? static_cast<double>(me.z) : 0.0;
  obs(k++) = static_cast<double>(cooldown_of(s, me));
  obs(k++) = census.red_bushes / cells;
  obs(k++) = census.blue_bushes / cells;
  return obs;
}

std::map<AgentId, double> ah_step(AhState& s, const std::map<AgentId, AhAction>& actions) {
  int n = static_cast<int>(s.agents.size());
  if (static_cast<int>(actions.size()) != n) {
    throw std::invalid_argument("expected one action per agent");
  }
  for (const auto& [id, _] : actions) {
    if (id < 0 || id >= n) throw std::invalid_argument("action for unknown agent " + std::to_string(id));
  }
  std::map<AgentId, double> rewards;
  for (int i = 0; i < n; ++i) rewards[i] = 0.0;

  // Blocks, ascending id; an already-blocked agent's own block is cancelled.
  for (int i = 0; i < n; ++i) {
    AhAgentState& a = s.agents[static_cast<std::size_t>(i)];
    if (actions.at(i) != AhAction::Block || a.blocked_for_turn) continue;
    int ax = a.cell % s.cfg.grid_width, ay = a.cell / s.cfg.grid_width;
    const int dx[4] = {0, 0, -1, 1};
    const int dy[4] = {-1, 1, 0, 0};
    for (int d = 0; d < 4; ++d) {
      int x = ax + dx[d], y = ay + dy[d];
      if (!s.in_bounds(x, y)) continue;
      int other = agent_at(s, s.cell_index(x, y));
      if (other < 0) continue;
      s.agents[static_cast<std::size_t>(other)].blocked_for_turn = true;
      rewards[i] += s.agents[static_cast<std::size_t>(other)].preference == a.preference
                        ? s.cfg.r_block_same
                        : s.cfg.r_block_opposing;
    }
  }

  // Movement: a move succeeds only into a cell that was empty when the phase
  // began and that no lower-id mover also claims.
  std::vector<int> target(static_cast<std::size_t>(n), -1);
  std::set<int> occupied_at_start;
  for (const AhAgentState& a : s.agents) occupied_at_start.insert(a.cell);
  for (int i = 0; i < n; ++i) {
    AhAgentState& a = s.agents[static_cast<std::size_t>(i)];
    AhAction act = actions.at(i);
    bool is_move = act == AhAction::Up || act == AhAction::Down || act == AhAction::Left ||
                   act == AhAction::Right;
    if (!is_move || a.blocked_for_turn || !may_move(s, a)) continue;
    int x = a.cell % s.cfg.grid_width, y = a.cell / s.cfg.grid_width;
    if (act == AhAction::Up) --y;
    if (act == AhAction::Down) ++y;
    if (act == AhAction::Left) --x;
    if (act == AhAction::Right) ++x;
    if (!s.in_bounds(x, y)) continue;
    int cell = s.cell_index(x, y);
    if (occupied_at_start.count(cell)) continue;
    target[static_cast<std::size_t>(i)] = cell;
  }
  std::set<int> claimed;
  for (int i = 0; i < n; ++i) {
    int cell = target[static_cast<std::size_t>(i)];
    if (cell < 0) continue;
    if (claimed.count(cell)) continue;  // a lower id already took it
    claimed.insert(cell);
    s.agents[static_cast<std::size_t>(i)].cell = cell;
  }

  // Bush interactions on the agent's own cell.
  for (int i = 0; i < n; ++i) {
    AhAgentState& a = s.agents[static_cast<std::size_t>(i)];
    if (a.blocked_for_turn) continue;
    AhAction act = actions.at(i);
    auto it = s.bushes.find(a.cell);
    bool match = it != s.bushes.end() && it->second.color == a.preference;
    switch (act) {
      case AhAction::Eat:
        if (it != s.bushes.end() && it->second.has_ripe_berry) {
          it->second.has_ripe_berry = false;
          it->second.regrowth_countdown = s.cfg.berry_regrowth_ts;
          rewards[i] += match ? s.cfg.r_eat_match : s.cfg.r_eat_other;
        }
        break;
      case AhAction::ChangeColor:
        if (it != s.bushes.end()) {
          if (it->second.color != a.preference) {
            it->second.color = a.preference;
            rewards[i] += s.cfg.r_change_from_opposing;
          } else {
            rewards[i] += s.cfg.r_change_other;
          }
        }
        break;
      case AhAction::Plant:
        if (it == s.bushes.end()) {
          Bush b;
          b.cell = a.cell;
          b.color = a.preference;
          b.has_ripe_berry = false;
          b.regrowth_countdown = s.cfg.berry_regrowth_ts;
          b.age = 0;
          s.bushes[a.cell] = b;
          rewards[i] += s.cfg.r_plant;
        }
        break;
      case AhAction::Ripen:
        if (it != s.bushes.end() && !it->second.has_ripe_berry) {
          it->second.has_ripe_berry = true;
          it->second.regrowth_countdown = 0;
          rewards[i] += match ? s.cfg.r_ripen_match : s.cfg.r_ripen_other;
        }
        break;
      default:
        break;
    }
  }

  // Bush dynamics: regrowth and aging, death at the lifespan boundary, then
  // spontaneous growth on the configured cadence.
  for (auto it = s.bushes.begin(); it != s.bushes.end();) {
    Bush& b = it->second;
    if (!b.has_ripe_berry) {
      if (b.regrowth_countdown > 0) --b.regrowth_countdown;
      if (b.regrowth_countdown == 0) b.has_ripe_berry = true;
    }
    ++b.age;
    if (b.age >= s.cfg.bush_lifespan_ts) {
      it = s.bushes.erase(it);
    } else {
      ++it;
    }
  }
  ++s.step_index;
  if (s.step_index % s.cfg.bush_growth_rate_ts == 0) {
    AhCensus census = ah_census(s);
    int total = census.red_bushes + census.blue_bushes;
    for (BerryColor color : {BerryColor::Red, BerryColor::Blue}) {
      double share =
          total == 0 ? 0.0
                     : static_cast<double>(color == BerryColor::Red ? census.red_bushes
                                                                    : census.blue_bushes) /
                           static_cast<double>(total);
      if (s.env_rng.uniform() >= share) continue;
      std::vector<int> free_cells;
      free_cells.reserve(static_cast<std::size_t>(s.cfg.grid_width * s.cfg.grid_height));
      for (int cell = 0; cell < s.cfg.grid_width * s.cfg.grid_height; ++cell) {
        if (!s.bushes.count(cell)) free_cells.push_back(cell);
      }
      if (free_cells.empty()) continue;
      int cell = free_cells[s.env_rng.uniform_index(free_cells.size())];
      Bush b;
      b.cell = cell;
      b.color = color;
      b.has_ripe_berry = false;
      b.regrowth_countdown = s.cfg.berry_regrowth_ts;
      b.age = 0;
      s.bushes[cell] = b;
    }
  }

  for (AhAgentState& a : s.agents) {
    a.blocked_for_turn = false;
    a.move_cooldown = cooldown_of(s, a);
  }
  return rewards;
}

std::pair<AhState, AhState> ah_counterfactual_pair(const AhConfig& cfg, std::uint64_t seed) {
  AhState factual = ah_reset(cfg, seed);
  AhState flipped = factual;
  for (AhAgentState& a : flipped.agents) {
    a.z = 1 - a.z;
    a.move_cooldown = cooldown_of(flipped, a);
  }
  return {std::move(factual), std::move(flipped)};
}

AhCensus ah_census(const AhState& s) {
  AhCensus c;
  for (const auto& [_, b] : s.bushes) {
    if (b.color == BerryColor::Red) ++c.red_bushes;
    else ++c.blue_bushes;
    if (b.has_ripe_berry) ++c.ripe_berries;
  }
  return c;
}

std::vector<AgentProfile> ah_profiles(const AhState& s) {
  std::vector<AgentProfile> profiles;
  profiles.reserve(s.agents.size());
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const AhAgentState& a = s.agents[i];
    profiles.push_back({static_cast<AgentId>(i), a.z,
                        a.preference == BerryColor::Red ? 0 : 1, kAhActionCount});
  }
  return profiles;
}

std::string ah_invariant_violation(const AhState& s) {
  std::set<int> seen;
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const AhAgentState& a = s.agents[i];
    int x = a.cell % s.cfg.grid_width, y = a.cell / s.cfg.grid_width;
    if (!s.in_bounds(x, y)) return "agent " + std::to_string(i) + " is off the grid";
    if (!seen.insert(a.cell).second) {
      return "two agents share cell " + std::to_string(a.cell);
    }
    if (a.z != 0 && a.z != 1) return "agent " + std::to_string(i) + " has a bad z flag";
    if (a.z == 0 && a.move_cooldown != 0) {
      return "unimpaired agent " + std::to_string(i) + " has a nonzero cooldown";
    }
  }
  if (static_cast<int>(s.bushes.size()) > s.cfg.grid_width * s.cfg.grid_height) {
    return "more bushes than grid cells";
  }
  for (const auto& [cell, b] : s.bushes) {
    if (b.cell != cell) return "bush cell key mismatch";
    if (b.age >= s.cfg.bush_lifespan_ts) return "bush outlived its lifespan";
    if (b.regrowth_countdown < 0 || b.regrowth_countdown > s.cfg.berry_regrowth_ts) {
      return "bush regrowth countdown out of range";
    }
    if (b.has_ripe_berry && b.regrowth_countdown != 0) {
      return "ripe bush with a pending regrowth countdown";
    }
  }
  return "";
}

}  // namespace fairmarl
