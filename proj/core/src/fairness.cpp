#include "fairmarl/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fairmarl {

std::string to_string(FairnessMetric m) {
  switch (m) {
    case FairnessMetric::DP: return "dp";
    case FairnessMetric::CF: return "cf";
    case FairnessMetric::CSP: return "csp";
  }
  return "dp";
}

FairnessMetric fairness_metric_from_string(const std::string& s) {
  if (s == "dp") return FairnessMetric::DP;
  if (s == "cf") return FairnessMetric::CF;
  if (s == "csp") return FairnessMetric::CSP;
  throw std::invalid_argument("unknown fairness metric: " + s);
}

void PenaltySpec::validate() const {
  if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("alpha and beta must be non-negative");
  if (metric == FairnessMetric::CSP && lf_domain.empty()) {
    throw std::invalid_argument("CSP penalty requires a non-empty lf domain");
  }
}

namespace {

double mean_over(const std::map<AgentId, double>& values, const std::set<AgentId>& group) {
  if (group.empty()) throw std::invalid_argument("disparity over an empty group");
  double sum = 0.0;
  for (AgentId id : group) {
    auto it = values.find(id);
    if (it == values.end()) throw std::out_of_range("agent missing from returns map");
    sum += it->second;
  }
  return sum / static_cast<double>(group.size());
}

}  // namespace

std::vector<double> shift_positive(std::vector<double> values) {
  if (values.empty()) return values;
  double lo = *std::min_element(values.begin(), values.end());
  if (lo >= 0.0) return values;
  for (double& v : values) v += -lo + 1e-9;
  return values;
}

double demographic_disparity(const std::map<AgentId, double>& returns,
                             const GroupPartition& partition) {
  return std::abs(mean_over(returns, partition.sensitive) -
                  mean_over(returns, partition.non_sensitive));
}

double counterfactual_disparity(const std::map<AgentId, double>& factual,
                                const std::map<AgentId, double>& counterfactual) {
  if (factual.size() != counterfactual.size()) {
    throw std::invalid_argument("factual/counterfactual populations differ");
  }
  double sum = 0.0;
  for (const auto& [id, g] : factual) {
    auto it = counterfactual.find(id);
    if (it == counterfactual.end()) {
      throw std::invalid_argument("factual/counterfactual populations differ");
    }
    sum += std::abs(g - it->second);
  }
  return sum;
}

CspResult conditional_statistical_disparity(const std::map<AgentId, double>& returns,
                                            const GroupPartition& partition) {
  CspResult res;
  for (const auto& [lf, members] : partition.by_lf) {
    std::set<AgentId> s1, s0;
    for (AgentId id : members) {
      if (partition.sensitive.count(id)) s1.insert(id);
      if (partition.non_sensitive.count(id)) s0.insert(id);
    }
    if (s1.empty() || s0.empty()) {
      res.skipped_lf.push_back(lf);
      continue;
    }
    double d = std::abs(mean_over(returns, s1) - mean_over(returns, s0));
    res.per_lf[lf] = d;
    res.total += d;
  }
  if (res.per_lf.empty()) {
    throw std::invalid_argument("no lf level has both subgroups populated");
  }
  return res;
}

double dp_penalty(std::pair<double, double> group_returns,
                  std::pair<double, double> group_values, const PenaltySpec& spec) {
  spec.validate();
  return spec.alpha * std::abs(group_returns.first - group_returns.second) +
         spec.beta * std::abs(group_values.first - group_values.second);
}

double cf_penalty(const std::map<AgentId, std::pair<double, double>>& factual,
                  const std::map<AgentId, std::pair<double, double>>& counterfactual,
                  const PenaltySpec& spec) {
  spec.validate();
  if (factual.size() != counterfactual.size()) {
    throw std::invalid_argument("factual/counterfactual populations differ");
  }
  double g_sum = 0.0, v_sum = 0.0;
  for (const auto& [id, gv] : factual) {
    auto it = counterfactual.find(id);
    if (it == counterfactual.end()) {
      throw std::invalid_argument("factual/counterfactual populations differ");
    }
    g_sum += std::abs(gv.first - it->second.first);
    v_sum += std::abs(gv.second - it->second.second);
  }
  return spec.alpha * g_sum + spec.beta * v_sum;
}

double csp_penalty(const std::map<int, std::pair<double, double>>& per_lf_group_returns,
                   const std::map<int, std::pair<double, double>>& per_lf_group_values,
                   const PenaltySpec& spec) {
  spec.validate();
  if (per_lf_group_returns.empty() && per_lf_group_values.empty()) {
    throw std::invalid_argument("no lf level has both subgroups populated");
  }
  double g_sum = 0.0, v_sum = 0.0;
  for (const auto& [lf, gg] : per_lf_group_returns) g_sum += std::abs(gg.first - gg.second);
  for (const auto& [lf, vv] : per_lf_group_values) v_sum += std::abs(vv.first - vv.second);
  return spec.alpha * g_sum + spec.beta * v_sum;
}

double gini(const std::vector<double>& rewards) {
  if (rewards.empty()) throw std::invalid_argument("gini of an empty vector");
  std::vector<double> x = shift_positive(rewards);
  double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  if (mean == 0.0) return 0.0;  // all-zero vector
  double diff_sum = 0.0;
  for (double a : x)
    for (double b : x) diff_sum += std::abs(a - b);
  double n = static_cast<double>(x.size());
  return diff_sum / (2.0 * n * n * mean);
}

double jfi(const std::vector<double>& rewards) {
  if (rewards.empty()) throw std::invalid_argument("jfi of an empty vector");
  std::vector<double> x = shift_positive(rewards);
  double sum = std::accumulate(x.begin(), x.end(), 0.0);
  double sq = 0.0;
  for (double a : x) sq += a * a;
  if (sq == 0.0) return 1.0;  // all-zero vector: perfect equality of nothing
  return (sum * sum) / (static_cast<double>(x.size()) * sq);
}

double nnsw(const std::vector<double>& rewards) {
  if (rewards.empty()) throw std::invalid_argument("nnsw of an empty vector");
  std::vector<double> x = shift_positive(rewards);
  double n = static_cast<double>(x.size());
  double arith = std::accumulate(x.begin(), x.end(), 0.0) / n;
  if (arith == 0.0) return 1.0;
  double log_sum = 0.0;
  for (double a : x) log_sum += std::log(std::max(a, 1e-300));
  double geo = std::exp(log_sum / n);
  return geo / arith;
}

double price_of_fairness(double fair_mean_reward, double baseline_mean_reward) {
  if (baseline_mean_reward == 0.0) {
    throw std::invalid_argument("price of fairness undefined for a zero baseline");
  }
  return (baseline_mean_reward - fair_mean_reward) / std::abs(baseline_mean_reward);
}

FairnessReport report(const std::map<AgentId, double>& returns,
                      const GroupPartition& partition, const ReportOptions& options) {
  FairnessReport rep;
  rep.dp = demographic_disparity(returns, partition);
  CspResult csp = conditional_statistical_disparity(returns, partition);
  rep.csp_by_lf = csp.per_lf;
  rep.csp_total = csp.total;
  rep.csp_skipped_lf = csp.skipped_lf;
  if (options.counterfactual_returns) {
    rep.cf = counterfactual_disparity(returns, *options.counterfactual_returns);
  }
  std::vector<double> flat;
  flat.reserve(returns.size());
  for (const auto& [_, g] : returns) flat.push_back(g);
  rep.gini = gini(flat);
  rep.jfi = jfi(flat);
  rep.nnsw = nnsw(flat);
  rep.mean_reward = std::accumulate(flat.begin(), flat.end(), 0.0) / static_cast<double>(flat.size());
  if (options.baseline_mean_reward) {
    rep.price_of_fairness = price_of_fairness(rep.mean_reward, *options.baseline_mean_reward);
  }
  return rep;
}

namespace {

std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

std::string FairnessReport::csv_header() {
  return "dp,cf,csp_total,gini,jfi,nnsw,price_of_fairness,mean_reward,csp_skipped_lf_count";
}

std::string FairnessReport::csv_row() const {
  std::ostringstream os;
  os << fmt_num(dp) << ',' << (cf ? fmt_num(*cf) : "") << ',' << fmt_num(csp_total) << ','
     << fmt_num(gini) << ',' << fmt_num(jfi) << ',' << fmt_num(nnsw) << ','
     << (price_of_fairness ? fmt_num(*price_of_fairness) : "") << ',' << fmt_num(mean_reward)
     << ',' << csp_skipped_lf.size();
  return os.str();
}

std::string FairnessReport::pretty() const {
  std::ostringstream os;
  os << "demographic disparity : " << fmt_num(dp) << '\n';
  if (cf) os << "counterfactual        : " << fmt_num(*cf) << '\n';
  os << "csp total             : " << fmt_num(csp_total) << '\n';
  for (const auto& [lf, d] : csp_by_lf) {
    os << "  csp[lf=" << lf << "]          : " << fmt_num(d) << '\n';
  }
  for (int lf : csp_skipped_lf) os << "  csp[lf=" << lf << "]          : skipped (empty subgroup)\n";
  os << "gini                  : " << fmt_num(gini) << '\n'
     << "jfi                   : " << fmt_num(jfi) << '\n'
     << "nnsw                  : " << fmt_num(nnsw) << '\n';
  if (price_of_fairness) os << "price of fairness     : " << fmt_num(*price_of_fairness) << '\n';
  os << "mean reward           : " << fmt_num(mean_reward) << '\n';
  return os.str();
}

std::pair<double, double> PenaltyNormalizer::normalize(double raw_return_part,
                                                       double raw_value_part) {
  max_return_ = std::max(max_return_, std::abs(raw_return_part));
  max_value_ = std::max(max_value_, std::abs(raw_value_part));
  return {raw_return_part / max_return_, raw_value_part / max_value_};
}

}  // namespace fairmarl
