#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairmarl/env/hospital.hpp"
#include "fairmarl/fairness.hpp"
#include "fairmarl/harness/config.hpp"
#include "fairmarl/trajectory.hpp"

namespace fairmarl {

struct EpisodeRow {
  std::string phase;  // "train" or "eval"
  int episode = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  double mean_reward = 0.0;  // per-agent (grid world) or per-patient (hospital)
  double disparity = 0.0;    // the configured penalty metric, measured on this episode
  double dp = 0.0;
  double penalty = 0.0;
  double lambda = 0.0;
  double objective = 0.0;
  std::optional<HsMetrics> hs;
};

// Which sub-policy (hierarchical baseline) or head (two-headed baseline) was
// active, recorded during training and evaluation for the trace invariants.
struct PolicyTraceRow {
  int eval_phase = 0;  // 0 while training, 1 while evaluating
  int episode = 0;
  AgentId agent = 0;
  int step = 0;
  int head = 0;
};

struct RunRecord {
  ExperimentConfig config;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<EpisodeRow> rows;
  FairnessReport final_report;
  double wall_clock_sec = 0.0;
  std::vector<std::string> checkpoint_paths;
  std::string metrics_csv_path;
  std::vector<PolicyTraceRow> trace;
};

// <output_dir>/<config hash>; seed artifacts live in seed<k>/ below it.
std::string run_dir(const ExperimentConfig& cfg);
std::string seed_dir(const ExperimentConfig& cfg, std::uint64_t seed);
// Human-readable point label for plots and summaries.
std::string run_label(const ExperimentConfig& cfg);

std::vector<std::string> metric_csv_columns();

// Trains every learner the configuration calls for, writes
// seed<k>/train_metrics.csv and final checkpoints, returns the record.
RunRecord train(const ExperimentConfig& cfg, std::uint64_t seed);

// Frozen-policy rollouts from saved checkpoints (checkpoint_dir defaults to
// this run's seed directory). Writes eval_metrics.csv and report.csv.
RunRecord evaluate(const ExperimentConfig& cfg, std::uint64_t seed,
                   const std::string& checkpoint_dir = "");

struct SweepGrid {
  std::vector<double> alphas{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> betas{0.0, 0.25, 0.5, 0.75, 1.0};
  // Used instead of the alpha/beta grid when the base algorithm is soto.
  std::vector<double> soto_alphas{0.9, 1.0, 2.0, 5.0};
};

struct SweepFailure {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string error;
};

struct SweepResult {
  std::vector<RunRecord> runs;  // evaluation records of completed runs
  std::vector<SweepFailure> failures;
  std::string summary_csv_path;
  std::string medians_csv_path;
  std::string best_config_hash;  // lowest median demographic disparity
};

// Train + evaluate each grid point for each seed. Fair penalty sweeps always
// include the (0, 0) baseline; price of fairness is filled per seed against
// it. Failures are recorded and the sweep continues.
SweepResult sweep(const ExperimentConfig& base, const SweepGrid& grid);

// Training curves, disparity boxplots, and the disparity/reward Pareto
// frontier, each as an SVG plus its underlying CSV. Returns written paths.
std::vector<std::string> export_plots(const std::vector<RunRecord>& records,
                                      const std::string& out_dir);

}  // namespace fairmarl
