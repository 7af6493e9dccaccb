#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fairmarl/trajectory.hpp"

namespace fairmarl {

enum class FairnessMetric { DP, CF, CSP };

std::string to_string(FairnessMetric m);
FairnessMetric fairness_metric_from_string(const std::string& s);

// Weights of the retrospective (alpha, realized returns) and prospective
// (beta, value estimates) penalty components.
struct PenaltySpec {
  FairnessMetric metric = FairnessMetric::DP;
  double alpha = 0.0;
  double beta = 0.0;
  std::set<int> lf_domain;  // required for CSP

  void validate() const;
};

// Aggregate fairness and inequality statistics for one evaluation.
struct FairnessReport {
  double dp = 0.0;
  std::optional<double> cf;
  std::map<int, double> csp_by_lf;
  double csp_total = 0.0;
  std::vector<int> csp_skipped_lf;  // lf levels with one empty subgroup
  double gini = 0.0;
  double jfi = 1.0;
  double nnsw = 1.0;
  std::optional<double> price_of_fairness;
  double mean_reward = 0.0;

  static std::string csv_header();
  std::string csv_row() const;
  std::string pretty() const;
};

// |mean(N1) - mean(N0)| over per-agent returns. Both groups must be non-empty.
double demographic_disparity(const std::map<AgentId, double>& returns,
                             const GroupPartition& partition);

// sum_i |factual_i - counterfactual_i|; key sets must match.
double counterfactual_disparity(const std::map<AgentId, double>& factual,
                                const std::map<AgentId, double>& counterfactual);

// Per-lf |mean(N1 & Nv) - mean(N0 & Nv)| and their sum. Levels where either
// subgroup is empty are skipped and reported back.
struct CspResult {
  std::map<int, double> per_lf;
  double total = 0.0;
  std::vector<int> skipped_lf;
};
CspResult conditional_statistical_disparity(const std::map<AgentId, double>& returns,
                                            const GroupPartition& partition);

// Penalty assemblies: alpha * return-part + beta * value-part (Fair-PPO).
double dp_penalty(std::pair<double, double> group_returns,
                  std::pair<double, double> group_values, const PenaltySpec& spec);
double cf_penalty(const std::map<AgentId, std::pair<double, double>>& factual,
                  const std::map<AgentId, std::pair<double, double>>& counterfactual,
                  const PenaltySpec& spec);
double csp_penalty(const std::map<int, std::pair<double, double>>& per_lf_group_returns,
                   const std::map<int, std::pair<double, double>>& per_lf_group_values,
                   const PenaltySpec& spec);

// Shift rule shared by the inequality statistics and welfare weights: if any
// entry is negative, every entry is shifted by (-min + 1e-9).
std::vector<double> shift_positive(std::vector<double> values);

// Inequality statistics. Vectors containing negative entries are shifted by
// (-min + 1e-9) first; gini of an all-zero vector is 0, jfi is 1.
double gini(const std::vector<double>& rewards);
double jfi(const std::vector<double>& rewards);
double nnsw(const std::vector<double>& rewards);

// (baseline - fair) / |baseline|; baseline must be non-zero.
double price_of_fairness(double fair_mean_reward, double baseline_mean_reward);

struct ReportOptions {
  std::optional<std::map<AgentId, double>> counterfactual_returns;
  std::optional<double> baseline_mean_reward;
};

FairnessReport report(const std::map<AgentId, double>& returns,
                      const GroupPartition& partition, const ReportOptions& options = {});

// Running-max normalizer for the two penalty components during training.
// Each component is divided by the largest absolute value seen so far
// (including the current one), floored at 1e-8.
class PenaltyNormalizer {
 public:
  // Returns (normalized_return_part, normalized_value_part).
  std::pair<double, double> normalize(double raw_return_part, double raw_value_part);
  double return_scale() const { return max_return_; }
  double value_scale() const { return max_value_; }

 private:
  static constexpr double kFloor = 1e-8;
  double max_return_ = kFloor;
  double max_value_ = kFloor;
};

}  // namespace fairmarl
