#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairmarl/algo/fen.hpp"
#include "fairmarl/algo/soto.hpp"
#include "fairmarl/env/ah.hpp"
#include "fairmarl/env/hospital.hpp"
#include "fairmarl/fairness.hpp"
#include "fairmarl/ppo.hpp"

namespace fairmarl {

enum class EnvKind { Ah, Hs };
enum class Algorithm { FairPpo, Ppo, Fen, Soto };

std::string to_string(EnvKind env);
EnvKind env_kind_from_string(const std::string& s);
std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

// Everything one run needs: the environment and its scale, the algorithm and
// its hyperparameters, the penalty weights, seeds, and output plumbing.
struct ExperimentConfig {
  EnvKind environment = EnvKind::Ah;
  Algorithm algorithm = Algorithm::FairPpo;

  PenaltySpec penalty;  // metric, alpha, beta; lf domain filled per environment
  LambdaMode lambda_mode = LambdaMode::Dynamic;
  double lambda_value = 0.0;
  double lambda_max = 10.0;

  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  int train_episodes = 150;
  int eval_episodes = 10;
  int eval_episode_length = 0;  // grid-world eval steps; 0 reuses the training length
  int hidden = 32;
  int checkpoint_every = 0;  // 0 keeps only the final checkpoint
  bool deterministic_eval = true;

  PpoConfig ppo;     // fairppo / ppo updates
  FenConfig fen;     // fen runs use fen.ppo
  SotoConfig soto;   // soto runs use soto.ppo
  AhConfig ah;
  HsConfig hs;

  std::string output_dir = "runs";

  void validate() const;
};

// Desk scale: small enough for CI, dynamics intact.
ExperimentConfig desk_ah_config();
ExperimentConfig desk_hs_config();
// Full scale as reported.
ExperimentConfig paper_ah_config();
ExperimentConfig paper_hs_config();

// Fills environment-dependent blanks (the CSP legitimate-factor domain) and
// zeroes the penalty when the algorithm label is plain ppo. Call after
// construction and after applying CLI overrides.
void normalize_config(ExperimentConfig& cfg);

// 16 hex characters over the canonical serialization, excluding seeds and
// output_dir so one hash names the experiment across seeds and machines.
std::string config_hash(const ExperimentConfig& cfg);

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);
void save_config_file(const ExperimentConfig& cfg, const std::string& path);

}  // namespace fairmarl
