#include "fairmarl/harness/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "fairmarl/checkpoint.hpp"
#include "fairmarl/env/ah.hpp"
#include "fairmarl/fair_penalty.hpp"
#include "fairmarl/harness/csv.hpp"
#include "fairmarl/harness/svg_plot.hpp"
#include "fairmarl/ppo.hpp"

namespace fairmarl {

namespace fs = std::filesystem;

namespace {

// Active-policy traces can get huge at full scale; a few evaluation episodes
// are enough to check the switching invariants.
constexpr int kTraceEvalEpisodes = 4;

std::string label(const char* prefix, int k) { return std::string(prefix) + std::to_string(k); }

FairPpoConfig learner_config(const ExperimentConfig& cfg) {
  FairPpoConfig fc;
  fc.ppo = cfg.ppo;
  fc.penalty = cfg.penalty;
  fc.lambda_mode = cfg.lambda_mode;
  fc.lambda_value = cfg.lambda_value;
  fc.lambda_max = cfg.lambda_max;
  return fc;
}

FairPpoConfig plain_learner_config(const PpoConfig& ppo) {
  FairPpoConfig fc;
  fc.ppo = ppo;
  return fc;
}

bool penalty_active(const ExperimentConfig& cfg) {
  return cfg.algorithm == Algorithm::FairPpo &&
         (cfg.penalty.alpha != 0.0 || cfg.penalty.beta != 0.0);
}

double mean_of_map(const std::map<AgentId, double>& m) {
  if (m.empty()) return 0.0;
  double s = 0.0;
  for (const auto& [id, v] : m) s += v;
  return s / static_cast<double>(m.size());
}

bool groups_ok(const GroupPartition& part) {
  return !part.sensitive.empty() && !part.non_sensitive.empty();
}

double safe_dp(const std::map<AgentId, double>& returns, const GroupPartition& part) {
  if (!groups_ok(part)) return 0.0;
  return demographic_disparity(returns, part);
}

double safe_csp_total(const std::map<AgentId, double>& returns, const GroupPartition& part) {
  if (!groups_ok(part)) return 0.0;
  return conditional_statistical_disparity(returns, part).total;
}

[[noreturn]] void abort_run(const ExperimentConfig& cfg, std::uint64_t seed, int episode,
                            const std::string& what) {
  std::string dir = seed_dir(cfg, seed);
  fs::create_directories(dir);
  std::string path = dir + "/abort_dump.json";
  nlohmann::json j{{"config_hash", config_hash(cfg)},
                   {"seed", seed},
                   {"episode", episode},
                   {"error", what}};
  std::ofstream(path, std::ios::binary) << j.dump(2) << "\n";
  throw std::runtime_error("training aborted at episode " + std::to_string(episode) + ": " + what +
                           " (dump: " + path + ")");
}

void check_finite(double v, const ExperimentConfig& cfg, std::uint64_t seed, int episode,
                  const char* what) {
  if (!std::isfinite(v)) abort_run(cfg, seed, episode, std::string(what) + " is not finite");
}

EpisodeRow base_row(const char* phase, int episode, std::uint64_t seed, const std::string& hash) {
  EpisodeRow r;
  r.phase = phase;
  r.episode = episode;
  r.seed = seed;
  r.config_hash = hash;
  return r;
}

struct TrainOutput {
  std::vector<EpisodeRow> rows;
  std::vector<std::pair<std::string, ActorCritic>> nets;
  std::vector<PolicyTraceRow> trace;
};

struct EvalOutput {
  std::vector<EpisodeRow> rows;
  FairnessReport report;
  std::vector<PolicyTraceRow> trace;
};

using NetMap = std::map<std::string, ActorCritic>;

void periodic_checkpoint(const ExperimentConfig& cfg, const std::string& sdir, int episode,
                         const std::vector<std::pair<std::string, const ActorCritic*>>& nets) {
  if (cfg.checkpoint_every <= 0) return;
  if ((episode + 1) % cfg.checkpoint_every != 0) return;
  for (const auto& [name, net] : nets)
    save_actor_critic(sdir + "/" + name + "_ep" + std::to_string(episode + 1) + ".ckpt", *net);
}

// ---------------------------------------------------------------------------
// Grid-world rollout plumbing.

using AhChooser = std::function<ActionSample(const AgentProfile&, const Eigen::VectorXd&)>;

struct AhRollout {
  TrajectoryBatch batch;
  std::vector<AgentProfile> profiles;
  std::map<AgentId, double> returns;
};

AhRollout ah_rollout_state(AhState st, const AhChooser& choose) {
  AhRollout out;
  out.profiles = ah_profiles(st);
  int n = static_cast<int>(out.profiles.size());
  int T = st.cfg.episode_length_ts;
  out.batch = TrajectoryBatch(T);
  for (const auto& p : out.profiles) out.batch.add_agent(p.id);
  std::vector<StepRecord> recs(static_cast<std::size_t>(n));
  for (int t = 0; t < T; ++t) {
    std::map<AgentId, AhAction> acts;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd obs = ah_observe(st, i);
      ActionSample s = choose(out.profiles[static_cast<std::size_t>(i)], obs);
      recs[static_cast<std::size_t>(i)] =
          StepRecord{std::move(obs), s.action, s.log_prob, 0.0, s.value, t == T - 1};
      acts[i] = ah_action_from_index(s.action);
    }
    std::map<AgentId, double> rewards = ah_step(st, acts);
    for (int i = 0; i < n; ++i) {
      recs[static_cast<std::size_t>(i)].reward = rewards.at(i);
      out.batch.push_step(i, recs[static_cast<std::size_t>(i)]);
    }
  }
  for (const auto& p : out.profiles) out.returns[p.id] = total_return(out.batch, p.id);
  return out;
}

AhRollout ah_rollout(const AhConfig& acfg, std::uint64_t env_seed, const AhChooser& choose) {
  return ah_rollout_state(ah_reset(acfg, env_seed), choose);
}

TrajectoryBatch filter_batch(const TrajectoryBatch& full, const std::set<AgentId>& keep) {
  TrajectoryBatch out(full.episode_length());
  for (AgentId id : keep) {
    out.add_agent(id);
    for (const StepRecord& s : full.steps(id)) out.push_step(id, s);
  }
  return out;
}

SampleBatch to_samples(const TrajectoryBatch& tb, const PpoConfig& ppo,
                       const std::map<AgentId, double>& bootstrap = {}) {
  return flatten(tb, advantages(tb, bootstrap, ppo));
}

AhChooser group_chooser(PpoLearner& g0, PpoLearner& g1, Rng& act) {
  return [&g0, &g1, &act](const AgentProfile& p, const Eigen::VectorXd& obs) {
    return sample_action((p.z == 0 ? g0 : g1).net(), obs, act);
  };
}

AhChooser frozen_group_chooser(const ActorCritic& n0, const ActorCritic& n1, Rng* act,
                               bool deterministic) {
  return [&n0, &n1, act, deterministic](const AgentProfile& p, const Eigen::VectorXd& obs) {
    const ActorCritic& net = p.z == 0 ? n0 : n1;
    if (deterministic) return ActionSample{argmax_action(net, obs), 0.0, 0.0};
    return sample_action(net, obs, *act);
  };
}

// Cross-episode population: returns and labels under episode-unique ids so
// one report can aggregate every evaluation episode.
struct PopulationAggregate {
  std::map<AgentId, double> returns;
  std::vector<AgentProfile> profiles;
  std::map<AgentId, double> cf_returns;
  bool use_cf = false;

  void add_episode(int episode, int stride, const std::vector<AgentProfile>& eps_profiles,
                   const std::map<AgentId, double>& eps_returns,
                   const std::map<AgentId, double>* eps_cf) {
    for (const AgentProfile& p : eps_profiles) {
      AgentId sid = episode * stride + p.id;
      profiles.push_back(AgentProfile{sid, p.z, p.lf, p.action_count});
      returns[sid] = eps_returns.at(p.id);
      if (eps_cf) cf_returns[sid] = eps_cf->at(p.id);
    }
    if (eps_cf) use_cf = true;
  }

  FairnessReport make_report() const {
    ReportOptions opts;
    if (use_cf) opts.counterfactual_returns = cf_returns;
    return report(returns, partition(profiles), opts);
  }
};

// ---------------------------------------------------------------------------
// Fair-PPO (and plain PPO) on the grid world: one learner per group,
// centrally assembled penalty.

struct GroupUpdate {
  double penalty = 0.0;
  double lambda = 0.0;
  double objective = 0.0;
};

GroupUpdate update_group_learners(const ExperimentConfig& cfg, PpoLearner& g0, PpoLearner& g1,
                                  const TrajectoryBatch& full, const GroupPartition& part,
                                  PenaltyNormalizer& norm, GroupPenaltyInputs* inputs) {
  bool h0 = !part.non_sensitive.empty();
  bool h1 = !part.sensitive.empty();
  SampleBatch b0, b1;
  if (h0) b0 = to_samples(filter_batch(full, part.non_sensitive), cfg.ppo);
  if (h1) b1 = to_samples(filter_batch(full, part.sensitive), cfg.ppo);
  UpdateStats s0{}, s1{};
  GroupUpdate out;
  if (inputs) {
    GroupPenaltyTerms terms = assemble_group_penalty(std::move(*inputs), cfg.penalty, norm,
                                                     g0.net().value, g1.net().value);
    if (h0) s0 = g0.update(b0, &terms.net0);
    if (h1) s1 = g1.update(b1, &terms.net1);
    out.penalty = terms.value;
  } else {
    if (h0) s0 = g0.update(b0);
    if (h1) s1 = g1.update(b1);
  }
  int updated = (h0 ? 1 : 0) + (h1 ? 1 : 0);
  if (updated > 0) {
    out.lambda = (s0.lambda + s1.lambda) / updated;
    out.objective = (s0.objective_before + s1.objective_before) / updated;
  }
  return out;
}

TrainOutput train_group_ah(const ExperimentConfig& cfg, std::uint64_t seed,
                           const std::string& hash, const std::string& sdir) {
  int obs_dim = ah_observation_dim();
  FairPpoConfig fc = learner_config(cfg);
  Rng i0(substream_seed(seed, "init.group0"));
  Rng i1(substream_seed(seed, "init.group1"));
  PpoLearner g0(ActorCritic(obs_dim, kAhActionCount, cfg.hidden, i0), fc,
                substream_seed(seed, "shuffle.group0"));
  PpoLearner g1(ActorCritic(obs_dim, kAhActionCount, cfg.hidden, i1), fc,
                substream_seed(seed, "shuffle.group1"));
  PenaltyNormalizer norm;
  bool active = penalty_active(cfg);
  bool paired = active && cfg.penalty.metric == FairnessMetric::CF;

  TrainOutput out;
  for (int ep = 0; ep < cfg.train_episodes; ++ep) {
    std::uint64_t env_seed = substream_seed(seed, label("env.ep", ep));
    std::uint64_t act_seed = substream_seed(seed, label("act.ep", ep));
    EpisodeRow row = base_row("train", ep, seed, hash);
    try {
      if (!paired) {
        Rng act(act_seed);
        AhRollout ro = ah_rollout(cfg.ah, env_seed, group_chooser(g0, g1, act));
        GroupPartition part = partition(ro.profiles);
        bool ok = groups_ok(part);
        std::optional<GroupPenaltyInputs> in;
        if (active && ok) {
          in = cfg.penalty.metric == FairnessMetric::DP
                   ? group_dp_penalty_inputs(ro.batch, part)
                   : group_csp_penalty_inputs(ro.batch, part);
        }
        GroupUpdate gu =
            update_group_learners(cfg, g0, g1, ro.batch, part, norm, in ? &*in : nullptr);
        row.mean_reward = mean_of_map(ro.returns);
        row.dp = safe_dp(ro.returns, part);
        row.disparity = cfg.penalty.metric == FairnessMetric::CSP
                            ? safe_csp_total(ro.returns, part)
                            : row.dp;
        row.penalty = gu.penalty;
        row.lambda = gu.lambda;
        row.objective = gu.objective;
      } else {
        std::pair<AhState, AhState> states = ah_counterfactual_pair(cfg.ah, env_seed);
        Rng act_f(act_seed);
        Rng act_c(act_seed);
        AhRollout rf = ah_rollout_state(std::move(states.first), group_chooser(g0, g1, act_f));
        AhRollout rc = ah_rollout_state(std::move(states.second), group_chooser(g0, g1, act_c));
        GroupPartition part = partition(rf.profiles);
        std::map<AgentId, int> zmap;
        for (const auto& p : rf.profiles) zmap[p.id] = p.z;
        GroupPenaltyInputs in = group_cf_penalty_inputs(rf.batch, rc.batch, zmap);
        GroupUpdate gu = update_group_learners(cfg, g0, g1, rf.batch, part, norm, &in);
        row.mean_reward = mean_of_map(rf.returns);
        row.dp = safe_dp(rf.returns, part);
        row.disparity = counterfactual_disparity(rf.returns, rc.returns);
        row.penalty = gu.penalty;
        row.lambda = gu.lambda;
        row.objective = gu.objective;
      }
    } catch (const std::domain_error& e) {
      abort_run(cfg, seed, ep, e.what());
    }
    check_finite(row.objective, cfg, seed, ep, "ppo objective");
    check_finite(row.penalty, cfg, seed, ep, "fairness penalty");
    out.rows.push_back(row);
    periodic_checkpoint(cfg, sdir, ep, {{"group0", &g0.net()}, {"group1", &g1.net()}});
  }
  out.nets.emplace_back("group0", g0.net());
  out.nets.emplace_back("group1", g1.net());
  return out;
}

EvalOutput eval_group_ah(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash,
                         const NetMap& nets) {
  const ActorCritic& n0 = nets.at("group0");
  const ActorCritic& n1 = nets.at("group1");
  AhConfig acfg = cfg.ah;
  if (cfg.eval_episode_length > 0) acfg.episode_length_ts = cfg.eval_episode_length;
  bool paired = cfg.penalty.metric == FairnessMetric::CF;

  EvalOutput out;
  PopulationAggregate agg;
  for (int ep = 0; ep < cfg.eval_episodes; ++ep) {
    std::uint64_t env_seed = substream_seed(seed, label("eval.env.ep", ep));
    std::uint64_t act_seed = substream_seed(seed, label("eval.act.ep", ep));
    EpisodeRow row = base_row("eval", ep, seed, hash);
    if (!paired) {
      Rng act(act_seed);
      AhRollout ro =
          ah_rollout(acfg, env_seed, frozen_group_chooser(n0, n1, &act, cfg.deterministic_eval));
      GroupPartition part = partition(ro.profiles);
      row.mean_reward = mean_of_map(ro.returns);
      row.dp = safe_dp(ro.returns, part);
      row.disparity = cfg.penalty.metric == FairnessMetric::CSP
                          ? safe_csp_total(ro.returns, part)
                          : row.dp;
      agg.add_episode(ep, acfg.n_agents, ro.profiles, ro.returns, nullptr);
    } else {
      std::pair<AhState, AhState> states = ah_counterfactual_pair(acfg, env_seed);
      Rng act_f(act_seed);
      Rng act_c(act_seed);
      AhRollout rf = ah_rollout_state(std::move(states.first),
                                      frozen_group_chooser(n0, n1, &act_f, cfg.deterministic_eval));
      AhRollout rc = ah_rollout_state(std::move(states.second),
                                      frozen_group_chooser(n0, n1, &act_c, cfg.deterministic_eval));
      GroupPartition part = partition(rf.profiles);
      row.mean_reward = mean_of_map(rf.returns);
      row.dp = safe_dp(rf.returns, part);
      row.disparity = counterfactual_disparity(rf.returns, rc.returns);
      agg.add_episode(ep, acfg.n_agents, rf.profiles, rf.returns, &rc.returns);
    }
    out.rows.push_back(row);
  }
  out.report = agg.make_report();
  return out;
}

// ---------------------------------------------------------------------------
// Hospital day plumbing.

using HsChooser = std::function<ActionSample(const Eigen::VectorXd&)>;

struct HsDayData {
  std::array<std::vector<StepRecord>, kHsAgentCount> recs;
  std::array<std::vector<int>, kHsAgentCount> linked_patient;
  std::map<AgentId, double> patient_returns;
  std::vector<AgentProfile> patient_profiles;
  std::vector<int> patient_z;
  HsMetrics metrics;
};

HsDayData hs_run_day(HsState s, const std::array<HsChooser, kHsAgentCount>& choose) {
  HsDayData out;
  while (std::optional<HsDecision> d = hs_advance(s)) {
    int L = static_cast<int>(d->agent);
    ActionSample a = choose[static_cast<std::size_t>(L)](d->observation);
    hs_apply(s, *d, a.action);
    out.recs[static_cast<std::size_t>(L)].push_back(
        StepRecord{d->observation, a.action, a.log_prob, 0.0, a.value, false});
  }
  for (int L = 0; L < kHsAgentCount; ++L) {
    auto& r = out.recs[static_cast<std::size_t>(L)];
    const auto& rewards = s.decision_rewards[static_cast<std::size_t>(L)];
    if (r.size() != rewards.size())
      throw std::logic_error("decision log out of sync with the recorded rollout");
    for (std::size_t i = 0; i < r.size(); ++i) r[i].reward = rewards[i];
    if (!r.empty()) r.back().terminal = true;
    out.linked_patient[static_cast<std::size_t>(L)] =
        s.decision_patient[static_cast<std::size_t>(L)];
  }
  out.patient_returns = hs_patient_returns(s);
  out.patient_profiles = hs_patient_profiles(s);
  out.patient_z.reserve(s.patients.size());
  for (const Patient& p : s.patients) out.patient_z.push_back(p.z());
  out.metrics = episode_metrics(s);
  return out;
}

SampleBatch hs_samples(const std::vector<StepRecord>& recs, const PpoConfig& ppo) {
  TrajectoryBatch tb(static_cast<int>(recs.size()));
  tb.add_agent(0);
  for (const StepRecord& r : recs) tb.push_step(0, r);
  return flatten(tb, advantages(tb, {}, ppo));
}

Eigen::MatrixXd stack_columns(const std::vector<const Eigen::VectorXd*>& cols) {
  Eigen::MatrixXd m(cols.front()->size(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = *cols[i];
  return m;
}

// A learner's prospective contrasts: its own decision states grouped by the
// linked patient's attribute (and priority level for the conditional metric).
std::vector<ValueContrast> hs_learner_contrasts(const ExperimentConfig& cfg, const HsDayData& day,
                                                int L) {
  std::map<int, int> lf_of;
  for (const AgentProfile& p : day.patient_profiles) lf_of[p.id] = p.lf;
  const auto& recs = day.recs[static_cast<std::size_t>(L)];
  const auto& linked = day.linked_patient[static_cast<std::size_t>(L)];
  std::vector<int> levels;
  if (cfg.penalty.metric == FairnessMetric::CSP)
    levels.assign(cfg.penalty.lf_domain.begin(), cfg.penalty.lf_domain.end());
  else
    levels.push_back(-1);  // one pooled contrast

  std::vector<ValueContrast> out;
  for (int lf : levels) {
    std::vector<const Eigen::VectorXd*> a, b;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      int pid = linked[i];
      if (pid < 0) continue;
      if (lf >= 0 && lf_of.at(pid) != lf) continue;
      (day.patient_z[static_cast<std::size_t>(pid)] == 1 ? a : b).push_back(&recs[i].observation);
    }
    if (a.empty() || b.empty()) continue;
    ValueContrast c;
    c.obs_a = stack_columns(a);
    c.obs_b = stack_columns(b);
    out.push_back(std::move(c));
  }
  return out;
}

struct HsPenalty {
  std::array<PenaltyTerm, kHsAgentCount> terms;
  double value = 0.0;
};

// Retrospective part from patient rewards with one shared normalizer;
// prospective part per learner over its own patient-linked decision states.
HsPenalty assemble_hs_penalty(const ExperimentConfig& cfg, const HsDayData& day, double raw_ret,
                              const std::array<PpoLearner*, kHsAgentCount>& learners,
                              PenaltyNormalizer& ret_norm,
                              std::array<PenaltyNormalizer, kHsAgentCount>& val_norms) {
  HsPenalty out;
  auto [norm_ret, unused] = ret_norm.normalize(raw_ret, 0.0);
  (void)unused;
  double constant = cfg.penalty.alpha * norm_ret;
  double value_sum = 0.0;
  for (int L = 0; L < kHsAgentCount; ++L) {
    PenaltyTerm& t = out.terms[static_cast<std::size_t>(L)];
    t.constant_part = constant;
    if (cfg.penalty.beta == 0.0) continue;
    std::vector<ValueContrast> contrasts = hs_learner_contrasts(cfg, day, L);
    if (contrasts.empty()) continue;
    double raw_val =
        raw_value_part(learners[static_cast<std::size_t>(L)]->net().value, contrasts);
    val_norms[static_cast<std::size_t>(L)].normalize(0.0, raw_val);
    t.value_weight = cfg.penalty.beta / val_norms[static_cast<std::size_t>(L)].value_scale();
    t.contrasts = std::move(contrasts);
    value_sum += t.value_weight * raw_val;
  }
  out.value = constant + value_sum / kHsAgentCount;
  return out;
}

double hs_metric_disparity(const ExperimentConfig& cfg, const HsDayData& day,
                           const GroupPartition& part,
                           const std::map<AgentId, double>* cf_returns) {
  switch (cfg.penalty.metric) {
    case FairnessMetric::DP: return safe_dp(day.patient_returns, part);
    case FairnessMetric::CSP: return safe_csp_total(day.patient_returns, part);
    case FairnessMetric::CF:
      if (cf_returns) return counterfactual_disparity(day.patient_returns, *cf_returns);
      return safe_dp(day.patient_returns, part);
  }
  return 0.0;
}

constexpr std::array<const char*, kHsAgentCount> kHsLearnerNames = {"triage", "escort", "doctor"};

std::array<int, kHsAgentCount> hs_obs_dims() {
  return {triage_observation_dim(), escort_observation_dim(), doctor_observation_dim()};
}

constexpr std::array<int, kHsAgentCount> kHsActionCounts = {kTriageActionCount, kEscortActionCount,
                                                            kDoctorActionCount};

TrainOutput train_group_hs(const ExperimentConfig& cfg, std::uint64_t seed,
                           const std::string& hash, const std::string& sdir) {
  FairPpoConfig fc = learner_config(cfg);
  std::array<int, kHsAgentCount> dims = hs_obs_dims();
  std::vector<PpoLearner> learners;
  for (int L = 0; L < kHsAgentCount; ++L) {
    Rng init(substream_seed(seed, std::string("init.") + kHsLearnerNames[L]));
    learners.emplace_back(
        ActorCritic(dims[static_cast<std::size_t>(L)], kHsActionCounts[static_cast<std::size_t>(L)],
                    cfg.hidden, init),
        fc, substream_seed(seed, std::string("shuffle.") + kHsLearnerNames[L]));
  }
  PenaltyNormalizer ret_norm;
  std::array<PenaltyNormalizer, kHsAgentCount> val_norms;
  bool active = penalty_active(cfg);
  bool paired = active && cfg.penalty.metric == FairnessMetric::CF;

  TrainOutput out;
  for (int ep = 0; ep < cfg.train_episodes; ++ep) {
    std::uint64_t env_seed = substream_seed(seed, label("env.ep", ep));
    std::uint64_t act_seed = substream_seed(seed, label("act.ep", ep));
    EpisodeRow row = base_row("train", ep, seed, hash);
    try {
      auto make_choosers = [&](Rng& act) {
        std::array<HsChooser, kHsAgentCount> c;
        for (int L = 0; L < kHsAgentCount; ++L)
          c[static_cast<std::size_t>(L)] = [&, L](const Eigen::VectorXd& obs) {
            return sample_action(learners[static_cast<std::size_t>(L)].net(), obs, act);
          };
        return c;
      };
      Rng act_f(act_seed);
      HsDayData day;
      std::optional<std::map<AgentId, double>> cf_returns;
      if (!paired) {
        day = hs_run_day(hs_reset(cfg.hs, env_seed), make_choosers(act_f));
      } else {
        std::pair<HsState, HsState> states = hs_counterfactual_pair(cfg.hs, env_seed);
        Rng act_c(act_seed);
        day = hs_run_day(std::move(states.first), make_choosers(act_f));
        HsDayData cf_day = hs_run_day(std::move(states.second), make_choosers(act_c));
        cf_returns = cf_day.patient_returns;
      }
      GroupPartition part = partition(day.patient_profiles);
      double disparity =
          hs_metric_disparity(cfg, day, part, cf_returns ? &*cf_returns : nullptr);
      bool measurable = cfg.penalty.metric == FairnessMetric::CF ? cf_returns.has_value()
                                                                 : groups_ok(part);
      double obj_sum = 0.0, lam_sum = 0.0;
      int updated = 0;
      if (active && measurable) {
        HsPenalty pen =
            assemble_hs_penalty(cfg, day, disparity,
                                {&learners[0], &learners[1], &learners[2]}, ret_norm, val_norms);
        row.penalty = pen.value;
        for (int L = 0; L < kHsAgentCount; ++L) {
          const auto& recs = day.recs[static_cast<std::size_t>(L)];
          if (recs.empty()) continue;
          UpdateStats st = learners[static_cast<std::size_t>(L)].update(
              hs_samples(recs, cfg.ppo), &pen.terms[static_cast<std::size_t>(L)]);
          obj_sum += st.objective_before;
          lam_sum += st.lambda;
          ++updated;
        }
      } else {
        for (int L = 0; L < kHsAgentCount; ++L) {
          const auto& recs = day.recs[static_cast<std::size_t>(L)];
          if (recs.empty()) continue;
          UpdateStats st = learners[static_cast<std::size_t>(L)].update(hs_samples(recs, cfg.ppo));
          obj_sum += st.objective_before;
          lam_sum += st.lambda;
          ++updated;
        }
      }
      row.mean_reward = mean_of_map(day.patient_returns);
      row.dp = safe_dp(day.patient_returns, part);
      row.disparity = disparity;
      if (updated > 0) {
        row.objective = obj_sum / updated;
        row.lambda = lam_sum / updated;
      }
      row.hs = day.metrics;
    } catch (const std::domain_error& e) {
      abort_run(cfg, seed, ep, e.what());
    }
    check_finite(row.objective, cfg, seed, ep, "ppo objective");
    check_finite(row.penalty, cfg, seed, ep, "fairness penalty");
    out.rows.push_back(row);
    periodic_checkpoint(cfg, sdir, ep,
                        {{"triage", &learners[0].net()},
                         {"escort", &learners[1].net()},
                         {"doctor", &learners[2].net()}});
  }
  for (int L = 0; L < kHsAgentCount; ++L)
    out.nets.emplace_back(kHsLearnerNames[L], learners[static_cast<std::size_t>(L)].net());
  return out;
}

std::array<HsChooser, kHsAgentCount> frozen_hs_choosers(const std::array<const ActorCritic*, 3>& nets,
                                                        Rng* act, bool deterministic) {
  std::array<HsChooser, kHsAgentCount> c;
  for (int L = 0; L < kHsAgentCount; ++L) {
    const ActorCritic* net = nets[static_cast<std::size_t>(L)];
    c[static_cast<std::size_t>(L)] = [net, act, deterministic](const Eigen::VectorXd& obs) {
      if (deterministic) return ActionSample{argmax_action(*net, obs), 0.0, 0.0};
      return sample_action(*net, obs, *act);
    };
  }
  return c;
}

EvalOutput eval_group_hs(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash,
                         const NetMap& nets) {
  std::array<const ActorCritic*, 3> frozen = {&nets.at("triage"), &nets.at("escort"),
                                              &nets.at("doctor")};
  bool paired = cfg.penalty.metric == FairnessMetric::CF;
  EvalOutput out;
  PopulationAggregate agg;
  for (int ep = 0; ep < cfg.eval_episodes; ++ep) {
    std::uint64_t env_seed = substream_seed(seed, label("eval.env.ep", ep));
    std::uint64_t act_seed = substream_seed(seed, label("eval.act.ep", ep));
    EpisodeRow row = base_row("eval", ep, seed, hash);
    Rng act_f(act_seed);
    HsDayData day;
    std::optional<std::map<AgentId, double>> cf_returns;
    if (!paired) {
      day = hs_run_day(hs_reset(cfg.hs, env_seed),
                       frozen_hs_choosers(frozen, &act_f, cfg.deterministic_eval));
    } else {
      std::pair<HsState, HsState> states = hs_counterfactual_pair(cfg.hs, env_seed);
      Rng act_c(act_seed);
      day = hs_run_day(std::move(states.first),
                       frozen_hs_choosers(frozen, &act_f, cfg.deterministic_eval));
      HsDayData cf_day = hs_run_day(std::move(states.second),
                                    frozen_hs_choosers(frozen, &act_c, cfg.deterministic_eval));
      cf_returns = cf_day.patient_returns;
    }
    GroupPartition part = partition(day.patient_profiles);
    row.mean_reward = mean_of_map(day.patient_returns);
    row.dp = safe_dp(day.patient_returns, part);
    row.disparity = hs_metric_disparity(cfg, day, part, cf_returns ? &*cf_returns : nullptr);
    row.hs = day.metrics;
    agg.add_episode(ep, cfg.hs.patients_per_day, day.patient_profiles, day.patient_returns,
                    cf_returns ? &*cf_returns : nullptr);
    out.rows.push_back(row);
  }
  out.report = agg.make_report();
  return out;
}

// ---------------------------------------------------------------------------
// Hierarchical controller baseline.

struct WinSeq {
  AgentId sid = 0;
  int sub = 0;
  std::vector<StepRecord> recs;
  std::vector<int> dec_idx;
  Eigen::VectorXd boot_obs;
  bool terminal = true;
};

void close_window(WinSeq&& w, bool terminal, const Eigen::VectorXd* boot_obs,
                  std::vector<WinSeq>& sink) {
  if (w.recs.empty()) return;
  w.terminal = terminal;
  if (terminal)
    w.recs.back().terminal = true;
  else
    w.boot_obs = *boot_obs;
  sink.push_back(std::move(w));
}

// One update over every closed window of one sub-policy, bootstrapping the
// cut-off windows with the sub's own value estimate.
UpdateStats update_sub_windows(PpoLearner& sub, const std::vector<WinSeq>& wins, int max_len,
                               const PpoConfig& ppo) {
  TrajectoryBatch tb(max_len);
  std::map<AgentId, double> boot;
  for (const WinSeq& w : wins) {
    tb.add_agent(w.sid);
    for (const StepRecord& r : w.recs) tb.push_step(w.sid, r);
    if (!w.terminal) boot[w.sid] = sub.net().value_forward(w.boot_obs);
  }
  return sub.update(flatten(tb, advantages(tb, boot, ppo)));
}

TrainOutput train_fen_ah(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash,
                         const std::string& sdir) {
  const FenConfig& fen = cfg.fen;
  int obs_dim = ah_observation_dim();
  Rng init(substream_seed(seed, "init.fen"));
  FenStack stack = make_fen_stack(obs_dim, kAhActionCount, cfg.hidden, fen, init);
  FairPpoConfig pc = plain_learner_config(fen.ppo);
  PpoLearner ctrl(std::move(stack.controller), pc, substream_seed(seed, "shuffle.controller"));
  std::vector<PpoLearner> subs;
  for (int k = 0; k < fen.k_sub; ++k)
    subs.emplace_back(std::move(stack.subs[static_cast<std::size_t>(k)]), pc,
                      substream_seed(seed, label("shuffle.sub", k)));

  int n = cfg.ah.n_agents;
  int T = cfg.ah.episode_length_ts;
  int tm = fen.t_macro;
  TrainOutput out;
  for (int ep = 0; ep < cfg.train_episodes; ++ep) {
    std::uint64_t env_seed = substream_seed(seed, label("env.ep", ep));
    Rng act(substream_seed(seed, label("act.ep", ep)));
    EpisodeRow row = base_row("train", ep, seed, hash);
    try {
      AhState st = ah_reset(cfg.ah, env_seed);
      std::vector<AgentProfile> profiles = ah_profiles(st);
      std::vector<int> cur_sub(static_cast<std::size_t>(n), 0);
      std::vector<StepRecord> pend(static_cast<std::size_t>(n));
      std::vector<bool> has_pend(static_cast<std::size_t>(n), false);
      std::vector<std::vector<StepRecord>> ctrl_seq(static_cast<std::size_t>(n));
      std::vector<std::vector<WinSeq>> wins(static_cast<std::size_t>(fen.k_sub));
      std::vector<WinSeq> cur(static_cast<std::size_t>(n));
      std::vector<double> cum(static_cast<std::size_t>(n), 0.0);
      int next_sid = 0;

      for (int t = 0; t < T; ++t) {
        bool boundary = (t % tm == 0);
        double mean_avg_prev = 0.0;
        if (boundary && t > 0) {
          for (double c : cum) mean_avg_prev += c / t;
          mean_avg_prev /= n;
        }
        std::map<AgentId, AhAction> acts;
        std::vector<StepRecord> recs(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
          std::size_t ui = static_cast<std::size_t>(i);
          Eigen::VectorXd obs = ah_observe(st, i);
          if (boundary) {
            if (has_pend[ui]) {
              pend[ui].reward = fen_fair_efficient_reward(cum[ui] / t, mean_avg_prev, fen);
              ctrl_seq[ui].push_back(pend[ui]);
              close_window(std::move(cur[ui]), false, &obs,
                           wins[static_cast<std::size_t>(cur[ui].sub)]);
            }
            FenControllerStep cs =
                fen_controller_step(ctrl.net(), obs, t, cur_sub[ui], fen, act);
            cur_sub[ui] = cs.sub_policy;
            pend[ui] = StepRecord{obs, cs.sub_policy, cs.log_prob, 0.0, cs.value, false};
            has_pend[ui] = true;
            cur[ui] = WinSeq{};
            cur[ui].sid = next_sid++;
            cur[ui].sub = cur_sub[ui];
          }
          ActionSample s =
              sample_action(subs[static_cast<std::size_t>(cur_sub[ui])].net(), obs, act);
          recs[ui] = StepRecord{std::move(obs), s.action, s.log_prob, 0.0, s.value, false};
          acts[i] = ah_action_from_index(s.action);
        }
        std::map<AgentId, double> rewards = ah_step(st, acts);
        double mean_avg = 0.0;
        for (int i = 0; i < n; ++i) {
          cum[static_cast<std::size_t>(i)] += rewards.at(i);
          mean_avg += cum[static_cast<std::size_t>(i)] / (t + 1);
        }
        mean_avg /= n;
        for (int i = 0; i < n; ++i) {
          std::size_t ui = static_cast<std::size_t>(i);
          recs[ui].reward = cur_sub[ui] == 0
                                ? rewards.at(i)
                                : fen_fair_efficient_reward(cum[ui] / (t + 1), mean_avg, fen);
          cur[ui].recs.push_back(std::move(recs[ui]));
        }
      }
      double mean_avg_final = 0.0;
      for (double c : cum) mean_avg_final += c / T;
      mean_avg_final /= n;
      for (int i = 0; i < n; ++i) {
        std::size_t ui = static_cast<std::size_t>(i);
        if (has_pend[ui]) {
          pend[ui].reward = fen_fair_efficient_reward(cum[ui] / T, mean_avg_final, fen);
          pend[ui].terminal = true;
          ctrl_seq[ui].push_back(pend[ui]);
        }
        close_window(std::move(cur[ui]), true, nullptr,
                     wins[static_cast<std::size_t>(cur[ui].sub)]);
      }

      int n_macro = (T + tm - 1) / tm;
      TrajectoryBatch ctb(n_macro);
      for (int i = 0; i < n; ++i) {
        ctb.add_agent(i);
        for (const StepRecord& r : ctrl_seq[static_cast<std::size_t>(i)]) ctb.push_step(i, r);
      }
      UpdateStats cst = ctrl.update(flatten(ctb, advantages(ctb, {}, fen.ppo)));
      double obj_sum = cst.objective_before;
      int obj_n = 1;
      for (int k = 0; k < fen.k_sub; ++k) {
        if (wins[static_cast<std::size_t>(k)].empty()) continue;
        UpdateStats st_k = update_sub_windows(subs[static_cast<std::size_t>(k)],
                                              wins[static_cast<std::size_t>(k)], T, fen.ppo);
        obj_sum += st_k.objective_before;
        ++obj_n;
      }

      std::map<AgentId, double> returns;
      for (int i = 0; i < n; ++i) returns[i] = cum[static_cast<std::size_t>(i)];
      GroupPartition part = partition(profiles);
      row.mean_reward = mean_of_map(returns);
      row.dp = safe_dp(returns, part);
      row.disparity = row.dp;
      row.objective = obj_sum / obj_n;
    } catch (const std::domain_error& e) {
      abort_run(cfg, seed, ep, e.what());
    }
    check_finite(row.objective, cfg, seed, ep, "ppo objective");
    out.rows.push_back(row);
    std::vector<std::pair<std::string, const ActorCritic*>> view{{"controller", &ctrl.net()}};
    for (int k = 0; k < fen.k_sub; ++k)
      view.emplace_back(label("sub", k), &subs[static_cast<std::size_t>(k)].net());
    periodic_checkpoint(cfg, sdir, ep, view);
  }
  out.nets.emplace_back("controller", ctrl.net());
  for (int k = 0; k < fen.k_sub; ++k)
    out.nets.emplace_back(label("sub", k), subs[static_cast<std::size_t>(k)].net());
  return out;
}

EvalOutput eval_fen_ah(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash,
                       const NetMap& nets) {
  const FenConfig& fen = cfg.fen;
  const ActorCritic& ctrl = nets.at("controller");
  std::vector<const ActorCritic*> subs;
  for (int k = 0; k < fen.k_sub; ++k) subs.push_back(&nets.at(label("sub", k)));
  AhConfig acfg = cfg.ah;
  if (cfg.eval_episode_length > 0) acfg.episode_length_ts = cfg.eval_episode_length;
  int n = acfg.n_agents;
  int T = acfg.episode_length_ts;

  EvalOutput out;
  PopulationAggregate agg;
  for (int ep = 0; ep < cfg.eval_episodes; ++ep) {
    AhState st = ah_reset(acfg, substream_seed(seed, label("eval.env.ep", ep)));
    Rng act(substream_seed(seed, label("eval.act.ep", ep)));
    std::vector<AgentProfile> profiles = ah_profiles(st);
    std::vector<int> cur_sub(static_cast<std::size_t>(n), 0);
    std::map<AgentId, double> returns;
    for (int i = 0; i < n; ++i) returns[i] = 0.0;
    for (int t = 0; t < T; ++t) {
      bool boundary = (t % fen.t_macro == 0);
      std::map<AgentId, AhAction> acts;
      for (int i = 0; i < n; ++i) {
        std::size_t ui = static_cast<std::size_t>(i);
        Eigen::VectorXd obs = ah_observe(st, i);
        if (boundary) {
          if (cfg.deterministic_eval) {
            cur_sub[ui] = argmax_action(ctrl, obs);
          } else {
            cur_sub[ui] = fen_controller_step(ctrl, obs, t, cur_sub[ui], fen, act).sub_policy;
          }
        }
        if (ep < kTraceEvalEpisodes)
          out.trace.push_back(PolicyTraceRow{1, ep, i, t, cur_sub[ui]});
        int a = cfg.deterministic_eval
                    ? argmax_action(*subs[static_cast<std::size_t>(cur_sub[ui])], obs)
                    : sample_action(*subs[static_cast<std::size_t>(cur_sub[ui])], obs, act).action;
        acts[i] = ah_action_from_index(a);
      }
      std::map<AgentId, double> rewards = ah_step(st, acts);
      for (int i = 0; i < n; ++i) returns[i] += rewards.at(i);
    }
    GroupPartition part = partition(profiles);
    EpisodeRow row = base_row("eval", ep, seed, hash);
    row.mean_reward = mean_of_map(returns);
    row.dp = safe_dp(returns, part);
    row.disparity = row.dp;
    out.rows.push_back(row);
    agg.add_episode(ep, n, profiles, returns, nullptr);
  }
  out.report = agg.make_report();
  return out;
}

// Fair-efficient controller signal for the hospital: how close the impaired
// group's mean accumulated patient reward sits to the overall mean.
double hs_fair_signal(const HsState& s, const FenConfig& fen) {
  double all_sum = 0.0, imp_sum = 0.0;
  int all_n = 0, imp_n = 0;
  for (const Patient& p : s.patients) {
    if (p.stage == Patient::Stage::NotArrived) continue;
    all_sum += p.accumulated_reward;
    ++all_n;
    if (p.z() == 1) {
      imp_sum += p.accumulated_reward;
      ++imp_n;
    }
  }
  double mean_all = all_n > 0 ? all_sum / all_n : 0.0;
  double mean_imp = imp_n > 0 ? imp_sum / imp_n : mean_all;
  return fen_fair_efficient_reward(mean_imp, mean_all, fen);
}

TrainOutput train_fen_hs(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash,
                         const std::string& sdir) {
  const FenConfig& fen = cfg.fen;
  FairPpoConfig pc = plain_learner_config(fen.ppo);
  std::array<int, kHsAgentCount> dims = hs_obs_dims();
  std::vector<PpoLearner> ctrls;
  std::vector<std::vector<PpoLearner>> subls(kHsAgentCount);
  for (int L = 0; L < kHsAgentCount; ++L) {
    std::string base = kHsLearnerNames[L];
    Rng init(substream_seed(seed, "init.fen." + base));
    FenStack stack = make_fen_stack(dims[static_cast<std::size_t>(L)],
                                    kHsActionCounts[static_cast<std::size_t>(L)], cfg.hidden, fen,
                                    init);
    ctrls.emplace_back(std::move(stack.controller), pc,
                       substream_seed(seed, "shuffle." + base + "_controller"));
    for (int k = 0; k < fen.k_sub; ++k)
      subls[static_cast<std::size_t>(L)].emplace_back(
          std::move(stack.subs[static_cast<std::size_t>(k)]), pc,
          substream_seed(seed, "shuffle." + base + "_sub" + std::to_string(k)));
  }

  int tm = fen.t_macro;
  TrainOutput out;
  for (int ep = 0; ep < cfg.train_episodes; ++ep) {
    std::uint64_t env_seed = substream_seed(seed, label("env.ep", ep));
    Rng act(substream_seed(seed, label("act.ep", ep)));
    EpisodeRow row = base_row("train", ep, seed, hash);
    try {
      HsState s = hs_reset(cfg.hs, env_seed);
      std::array<int, kHsAgentCount> tcount{};
      std::array<int, kHsAgentCount> cur_sub{};
      std::array<StepRecord, kHsAgentCount> pend;
      std::array<bool, kHsAgentCount> has_pend{};
      std::array<std::vector<StepRecord>, kHsAgentCount> ctrl_seq;
      std::array<std::vector<std::vector<WinSeq>>, kHsAgentCount> wins;
      std::array<WinSeq, kHsAgentCount> cur;
      std::array<std::vector<double>, kHsAgentCount> fair_sig;
      for (int L = 0; L < kHsAgentCount; ++L)
        wins[static_cast<std::size_t>(L)].resize(static_cast<std::size_t>(fen.k_sub));
      int next_sid = 0;

      while (std::optional<HsDecision> d = hs_advance(s)) {
        std::size_t L = static_cast<std::size_t>(d->agent);
        int t = tcount[L];
        if (t % tm == 0) {
          double sig = hs_fair_signal(s, fen);
          if (has_pend[L]) {
            pend[L].reward = sig;
            ctrl_seq[L].push_back(pend[L]);
            close_window(std::move(cur[L]), false, &d->observation,
                         wins[L][static_cast<std::size_t>(cur[L].sub)]);
          }
          FenControllerStep cs = fen_controller_step(ctrls[L].net(), d->observation, t, cur_sub[L],
                                                     fen, act);
          cur_sub[L] = cs.sub_policy;
          pend[L] = StepRecord{d->observation, cs.sub_policy, cs.log_prob, 0.0, cs.value, false};
          has_pend[L] = true;
          cur[L] = WinSeq{};
          cur[L].sid = next_sid++;
          cur[L].sub = cur_sub[L];
        }
        ActionSample a =
            sample_action(subls[L][static_cast<std::size_t>(cur_sub[L])].net(), d->observation,
                          act);
        hs_apply(s, *d, a.action);
        cur[L].recs.push_back(
            StepRecord{d->observation, a.action, a.log_prob, 0.0, a.value, false});
        cur[L].dec_idx.push_back(t);
        fair_sig[L].push_back(hs_fair_signal(s, fen));
        ++tcount[L];
      }
      double sig_end = hs_fair_signal(s, fen);
      for (int L = 0; L < kHsAgentCount; ++L) {
        std::size_t uL = static_cast<std::size_t>(L);
        if (has_pend[uL]) {
          pend[uL].reward = sig_end;
          pend[uL].terminal = true;
          ctrl_seq[uL].push_back(pend[uL]);
        }
        close_window(std::move(cur[uL]), true, nullptr,
                     wins[uL][static_cast<std::size_t>(cur[uL].sub)]);
        for (int k = 0; k < fen.k_sub; ++k) {
          for (WinSeq& w : wins[uL][static_cast<std::size_t>(k)]) {
            for (std::size_t j = 0; j < w.recs.size(); ++j) {
              int di = w.dec_idx[j];
              w.recs[j].reward = k == 0
                                     ? s.decision_rewards[uL][static_cast<std::size_t>(di)]
                                     : fair_sig[uL][static_cast<std::size_t>(di)];
            }
          }
        }
      }

      double obj_sum = 0.0;
      int obj_n = 0;
      for (int L = 0; L < kHsAgentCount; ++L) {
        std::size_t uL = static_cast<std::size_t>(L);
        if (!ctrl_seq[uL].empty()) {
          TrajectoryBatch ctb(static_cast<int>(ctrl_seq[uL].size()));
          ctb.add_agent(0);
          for (const StepRecord& r : ctrl_seq[uL]) ctb.push_step(0, r);
          UpdateStats st = ctrls[uL].update(flatten(ctb, advantages(ctb, {}, fen.ppo)));
          obj_sum += st.objective_before;
          ++obj_n;
        }
        for (int k = 0; k < fen.k_sub; ++k) {
          const auto& ws = wins[uL][static_cast<std::size_t>(k)];
          if (ws.empty()) continue;
          UpdateStats st = update_sub_windows(subls[uL][static_cast<std::size_t>(k)], ws,
                                              tcount[uL] > 0 ? tcount[uL] : 1, fen.ppo);
          obj_sum += st.objective_before;
          ++obj_n;
        }
      }

      std::map<AgentId, double> returns = hs_patient_returns(s);
      std::vector<AgentProfile> profiles = hs_patient_profiles(s);
      GroupPartition part = partition(profiles);
      row.mean_reward = mean_of_map(returns);
      row.dp = safe_dp(returns, part);
      row.disparity = row.dp;
      if (obj_n > 0) row.objective = obj_sum / obj_n;
      row.hs = episode_metrics(s);
    } catch (const std::domain_error& e) {
      abort_run(cfg, seed, ep, e.what());
    }
    check_finite(row.objective, cfg, seed, ep, "ppo objective");
    out.rows.push_back(row);
    std::vector<std::pair<std::string, const ActorCritic*>> view;
    for (int L = 0; L < kHsAgentCount; ++L) {
      std::string base = kHsLearnerNames[L];
      view.emplace_back(base + "_controller", &ctrls[static_cast<std::size_t>(L)].net());
      for (int k = 0; k < fen.k_sub; ++k)
        view.emplace_back(base + "_sub" + std::to_string(k),
                          &subls[static_cast<std::size_t>(L)][static_cast<std::size_t>(k)].net());
    }
    periodic_checkpoint(cfg, sdir, ep, view);
  }
  for (int L = 0; L < kHsAgentCount; ++L) {
    std::string base = kHsLearnerNames[L];
    out.nets.emplace_back(base + "_controller", ctrls[static_cast<std::size_t>(L)].net());
    for (int k = 0; k < fen.k_sub; ++k)
      out.nets.emplace_back(base + "_sub" + std::to_string(k),
                            subls[static_cast<std::size_t>(L)][static_cast<std::size_t>(k)].net());
  }
  return out;
}

EvalOutput eval_fen_hs(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash,
                       const NetMap& nets) {
  const FenConfig& fen = cfg.fen;
  std::array<const ActorCritic*, kHsAgentCount> ctrls{};
  std::array<std::vector<const ActorCritic*>, kHsAgentCount> subs;
  for (int L = 0; L < kHsAgentCount; ++L) {
    std::string base = kHsLearnerNames[L];
    ctrls[static_cast<std::size_t>(L)] = &nets.at(base + "_controller");
    for (int k = 0; k < fen.k_sub; ++k)
      subs[static_cast<std::size_t>(L)].push_back(&nets.at(base + "_sub" + std::to_string(k)));
  }

  EvalOutput out;
  PopulationAggregate agg;
  for (int ep = 0; ep < cfg.eval_episodes; ++ep) {
    HsState s = hs_reset(cfg.hs, substream_seed(seed, label("eval.env.ep", ep)));
    Rng act(substream_seed(seed, label("eval.act.ep", ep)));
    std::array<int, kHsAgentCount> tcount{};
    std::array<int, kHsAgentCount> cur_sub{};
    while (std::optional<HsDecision> d = hs_advance(s)) {
      std::size_t L = static_cast<std::size_t>(d->agent);
      int t = tcount[L];
      if (t % fen.t_macro == 0) {
        if (cfg.deterministic_eval)
          cur_sub[L] = argmax_action(*ctrls[L], d->observation);
        else
          cur_sub[L] =
              fen_controller_step(*ctrls[L], d->observation, t, cur_sub[L], fen, act).sub_policy;
      }
      if (ep < kTraceEvalEpisodes)
        out.trace.push_back(PolicyTraceRow{1, ep, static_cast<AgentId>(L), t, cur_sub[L]});
      const ActorCritic& net = *subs[L][static_cast<std::size_t>(cur_sub[L])];
      int a = cfg.deterministic_eval ? argmax_action(net, d->observation)
                                     : sample_action(net, d->observation, act).action;
      hs_apply(s, *d, a);
      ++tcount[L];
    }
    std::map<AgentId, double> returns = hs_patient_returns(s);
    std::vector<AgentProfile> profiles = hs_patient_profiles(s);
    GroupPartition part = partition(profiles);
    EpisodeRow row = base_row("eval", ep, seed, hash);
    row.mean_reward = mean_of_map(returns);
    row.dp = safe_dp(returns, part);
    row.disparity = row.dp;
    row.hs = episode_metrics(s);
    out.rows.push_back(row);
    agg.add_episode(ep, cfg.hs.patients_per_day, profiles, returns, nullptr);
  }
  out.report = agg.make_report();
  return out;
}

// ---------------------------------------------------------------------------
// Two-headed self/team baseline.

TrainOutput train_soto_ah(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash,
                          const std::string& sdir) {
  const SotoConfig& soto = cfg.soto;
  int obs_dim = ah_observation_dim();
  Rng init(substream_seed(seed, "init.soto"));
  SotoPolicy pol = make_soto_policy(obs_dim, kAhActionCount, cfg.hidden, init);
  FairPpoConfig pc = plain_learner_config(soto.ppo);
  PpoLearner self(std::move(pol.self), pc, substream_seed(seed, "shuffle.self"));
  PpoLearner team(std::move(pol.team), pc, substream_seed(seed, "shuffle.team"));
  int n = cfg.ah.n_agents;

  TrainOutput out;
  for (int ep = 0; ep < cfg.train_episodes; ++ep) {
    double progress =
        cfg.train_episodes > 1 ? static_cast<double>(ep) / (cfg.train_episodes - 1) : 1.0;
    Rng head_rng(substream_seed(seed, label("head.ep", ep)));
    Rng act(substream_seed(seed, label("act.ep", ep)));
    EpisodeRow row = base_row("train", ep, seed, hash);
    try {
      std::vector<SotoHead> head(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        head[static_cast<std::size_t>(i)] = soto_select_head(head_rng, progress, soto);
        out.trace.push_back(
            PolicyTraceRow{0, ep, i, 0, static_cast<int>(head[static_cast<std::size_t>(i)])});
      }
      AhChooser choose = [&](const AgentProfile& p, const Eigen::VectorXd& obs) {
        PpoLearner& l =
            head[static_cast<std::size_t>(p.id)] == SotoHead::Self ? self : team;
        return sample_action(l.net(), obs, act);
      };
      AhRollout ro = ah_rollout(cfg.ah, substream_seed(seed, label("env.ep", ep)), choose);
      GroupPartition part = partition(ro.profiles);
      std::map<AgentId, double> weights = soto_welfare_weight(ro.returns, soto);
      std::set<AgentId> self_ids, team_ids;
      for (int i = 0; i < n; ++i)
        (head[static_cast<std::size_t>(i)] == SotoHead::Self ? self_ids : team_ids).insert(i);
      double obj_sum = 0.0;
      int obj_n = 0;
      if (!self_ids.empty()) {
        UpdateStats st = self.update(to_samples(filter_batch(ro.batch, self_ids), soto.ppo));
        obj_sum += st.objective_before;
        ++obj_n;
      }
      if (!team_ids.empty()) {
        TrajectoryBatch tb = filter_batch(ro.batch, team_ids);
        AdvantageBatch adv = advantages(tb, {}, soto.ppo);
        for (AgentId id : team_ids)
          for (AdvantageRecord& r : adv.rows.at(id)) r.advantage *= weights.at(id);
        UpdateStats st = team.update(flatten(tb, adv));
        obj_sum += st.objective_before;
        ++obj_n;
      }
      row.mean_reward = mean_of_map(ro.returns);
      row.dp = safe_dp(ro.returns, part);
      row.disparity = row.dp;
      if (obj_n > 0) row.objective = obj_sum / obj_n;
    } catch (const std::domain_error& e) {
      abort_run(cfg, seed, ep, e.what());
    }
    check_finite(row.objective, cfg, seed, ep, "ppo objective");
    out.rows.push_back(row);
    periodic_checkpoint(cfg, sdir, ep, {{"self", &self.net()}, {"team", &team.net()}});
  }
  out.nets.emplace_back("self", self.net());
  out.nets.emplace_back("team", team.net());
  return out;
}

EvalOutput eval_soto_ah(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash,
                        const NetMap& nets) {
  const ActorCritic& team = nets.at("team");
  AhConfig acfg = cfg.ah;
  if (cfg.eval_episode_length > 0) acfg.episode_length_ts = cfg.eval_episode_length;

  EvalOutput out;
  PopulationAggregate agg;
  for (int ep = 0; ep < cfg.eval_episodes; ++ep) {
    Rng act(substream_seed(seed, label("eval.act.ep", ep)));
    AhChooser choose = [&](const AgentProfile& p, const Eigen::VectorXd& obs) {
      (void)p;
      if (cfg.deterministic_eval) return ActionSample{argmax_action(team, obs), 0.0, 0.0};
      return sample_action(team, obs, act);
    };
    AhRollout ro = ah_rollout(acfg, substream_seed(seed, label("eval.env.ep", ep)), choose);
    GroupPartition part = partition(ro.profiles);
    EpisodeRow row = base_row("eval", ep, seed, hash);
    row.mean_reward = mean_of_map(ro.returns);
    row.dp = safe_dp(ro.returns, part);
    row.disparity = row.dp;
    out.rows.push_back(row);
    for (int i = 0; i < acfg.n_agents; ++i)
      if (ep < kTraceEvalEpisodes) out.trace.push_back(PolicyTraceRow{1, ep, i, 0, 1});
    agg.add_episode(ep, acfg.n_agents, ro.profiles, ro.returns, nullptr);
  }
  out.report = agg.make_report();
  return out;
}

TrainOutput train_soto_hs(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash,
                          const std::string& sdir) {
  const SotoConfig& soto = cfg.soto;
  FairPpoConfig pc = plain_learner_config(soto.ppo);
  std::array<int, kHsAgentCount> dims = hs_obs_dims();
  std::vector<PpoLearner> selfs, teams;
  for (int L = 0; L < kHsAgentCount; ++L) {
    std::string base = kHsLearnerNames[L];
    Rng init(substream_seed(seed, "init.soto." + base));
    SotoPolicy pol = make_soto_policy(dims[static_cast<std::size_t>(L)],
                                      kHsActionCounts[static_cast<std::size_t>(L)], cfg.hidden,
                                      init);
    selfs.emplace_back(std::move(pol.self), pc, substream_seed(seed, "shuffle." + base + "_self"));
    teams.emplace_back(std::move(pol.team), pc, substream_seed(seed, "shuffle." + base + "_team"));
  }

  TrainOutput out;
  for (int ep = 0; ep < cfg.train_episodes; ++ep) {
    double progress =
        cfg.train_episodes > 1 ? static_cast<double>(ep) / (cfg.train_episodes - 1) : 1.0;
    Rng head_rng(substream_seed(seed, label("head.ep", ep)));
    Rng act(substream_seed(seed, label("act.ep", ep)));
    EpisodeRow row = base_row("train", ep, seed, hash);
    try {
      std::array<SotoHead, kHsAgentCount> head{};
      for (int L = 0; L < kHsAgentCount; ++L) {
        head[static_cast<std::size_t>(L)] = soto_select_head(head_rng, progress, soto);
        out.trace.push_back(
            PolicyTraceRow{0, ep, L, 0, static_cast<int>(head[static_cast<std::size_t>(L)])});
      }
      std::array<HsChooser, kHsAgentCount> choose;
      for (int L = 0; L < kHsAgentCount; ++L) {
        PpoLearner& l = head[static_cast<std::size_t>(L)] == SotoHead::Self
                            ? selfs[static_cast<std::size_t>(L)]
                            : teams[static_cast<std::size_t>(L)];
        choose[static_cast<std::size_t>(L)] = [&l, &act](const Eigen::VectorXd& obs) {
          return sample_action(l.net(), obs, act);
        };
      }
      HsDayData day =
          hs_run_day(hs_reset(cfg.hs, substream_seed(seed, label("env.ep", ep))), choose);
      GroupPartition part = partition(day.patient_profiles);
      double scale = 1.0;
      if (groups_ok(part)) {
        double m0 = group_mean(day.patient_returns, part.non_sensitive);
        double m1 = group_mean(day.patient_returns, part.sensitive);
        scale = soto_group_ratio_weight(m0, m1, soto);
      }
      double obj_sum = 0.0;
      int obj_n = 0;
      for (int L = 0; L < kHsAgentCount; ++L) {
        std::size_t uL = static_cast<std::size_t>(L);
        const auto& recs = day.recs[uL];
        if (recs.empty()) continue;
        bool team_head = head[uL] == SotoHead::Team;
        TrajectoryBatch tb(static_cast<int>(recs.size()));
        tb.add_agent(0);
        for (const StepRecord& r : recs) tb.push_step(0, r);
        AdvantageBatch adv = advantages(tb, {}, soto.ppo);
        if (team_head)
          for (AdvantageRecord& r : adv.rows.at(0)) r.advantage *= scale;
        UpdateStats st = (team_head ? teams[uL] : selfs[uL]).update(flatten(tb, adv));
        obj_sum += st.objective_before;
        ++obj_n;
      }
      row.mean_reward = mean_of_map(day.patient_returns);
      row.dp = safe_dp(day.patient_returns, part);
      row.disparity = row.dp;
      if (obj_n > 0) row.objective = obj_sum / obj_n;
      row.hs = day.metrics;
    } catch (const std::domain_error& e) {
      abort_run(cfg, seed, ep, e.what());
    }
    check_finite(row.objective, cfg, seed, ep, "ppo objective");
    out.rows.push_back(row);
    std::vector<std::pair<std::string, const ActorCritic*>> view;
    for (int L = 0; L < kHsAgentCount; ++L) {
      view.emplace_back(std::string(kHsLearnerNames[L]) + "_self",
                        &selfs[static_cast<std::size_t>(L)].net());
      view.emplace_back(std::string(kHsLearnerNames[L]) + "_team",
                        &teams[static_cast<std::size_t>(L)].net());
    }
    periodic_checkpoint(cfg, sdir, ep, view);
  }
  for (int L = 0; L < kHsAgentCount; ++L) {
    out.nets.emplace_back(std::string(kHsLearnerNames[L]) + "_self",
                          selfs[static_cast<std::size_t>(L)].net());
    out.nets.emplace_back(std::string(kHsLearnerNames[L]) + "_team",
                          teams[static_cast<std::size_t>(L)].net());
  }
  return out;
}

EvalOutput eval_soto_hs(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash,
                        const NetMap& nets) {
  std::array<const ActorCritic*, 3> frozen = {&nets.at("triage_team"), &nets.at("escort_team"),
                                              &nets.at("doctor_team")};
  EvalOutput out;
  PopulationAggregate agg;
  for (int ep = 0; ep < cfg.eval_episodes; ++ep) {
    Rng act(substream_seed(seed, label("eval.act.ep", ep)));
    HsDayData day = hs_run_day(hs_reset(cfg.hs, substream_seed(seed, label("eval.env.ep", ep))),
                               frozen_hs_choosers(frozen, &act, cfg.deterministic_eval));
    GroupPartition part = partition(day.patient_profiles);
    EpisodeRow row = base_row("eval", ep, seed, hash);
    row.mean_reward = mean_of_map(day.patient_returns);
    row.dp = safe_dp(day.patient_returns, part);
    row.disparity = row.dp;
    row.hs = day.metrics;
    out.rows.push_back(row);
    if (ep < kTraceEvalEpisodes)
      for (int L = 0; L < kHsAgentCount; ++L)
        out.trace.push_back(PolicyTraceRow{1, ep, L, 0, 1});
    agg.add_episode(ep, cfg.hs.patients_per_day, day.patient_profiles, day.patient_returns,
                    nullptr);
  }
  out.report = agg.make_report();
  return out;
}

// ---------------------------------------------------------------------------
// Dispatch, persistence, sweep, plots.

TrainOutput run_training(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash,
                         const std::string& sdir) {
  if (cfg.environment == EnvKind::Ah) {
    switch (cfg.algorithm) {
      case Algorithm::FairPpo:
      case Algorithm::Ppo: return train_group_ah(cfg, seed, hash, sdir);
      case Algorithm::Fen: return train_fen_ah(cfg, seed, hash, sdir);
      case Algorithm::Soto: return train_soto_ah(cfg, seed, hash, sdir);
    }
  } else {
    switch (cfg.algorithm) {
      case Algorithm::FairPpo:
      case Algorithm::Ppo: return train_group_hs(cfg, seed, hash, sdir);
      case Algorithm::Fen: return train_fen_hs(cfg, seed, hash, sdir);
      case Algorithm::Soto: return train_soto_hs(cfg, seed, hash, sdir);
    }
  }
  throw std::logic_error("unreachable training dispatch");
}

EvalOutput run_evaluation(const ExperimentConfig& cfg, std::uint64_t seed, const std::string& hash,
                          const NetMap& nets) {
  if (cfg.environment == EnvKind::Ah) {
    switch (cfg.algorithm) {
      case Algorithm::FairPpo:
      case Algorithm::Ppo: return eval_group_ah(cfg, seed, hash, nets);
      case Algorithm::Fen: return eval_fen_ah(cfg, seed, hash, nets);
      case Algorithm::Soto: return eval_soto_ah(cfg, seed, hash, nets);
    }
  } else {
    switch (cfg.algorithm) {
      case Algorithm::FairPpo:
      case Algorithm::Ppo: return eval_group_hs(cfg, seed, hash, nets);
      case Algorithm::Fen: return eval_fen_hs(cfg, seed, hash, nets);
      case Algorithm::Soto: return eval_soto_hs(cfg, seed, hash, nets);
    }
  }
  throw std::logic_error("unreachable evaluation dispatch");
}

std::vector<std::string> learner_names(const ExperimentConfig& cfg) {
  bool grid = cfg.environment == EnvKind::Ah;
  switch (cfg.algorithm) {
    case Algorithm::FairPpo:
    case Algorithm::Ppo:
      if (grid) return {"group0", "group1"};
      return {"triage", "escort", "doctor"};
    case Algorithm::Fen: {
      std::vector<std::string> v;
      if (grid) {
        v.push_back("controller");
        for (int k = 0; k < cfg.fen.k_sub; ++k) v.push_back(label("sub", k));
      } else {
        for (const char* base : kHsLearnerNames) {
          v.push_back(std::string(base) + "_controller");
          for (int k = 0; k < cfg.fen.k_sub; ++k)
            v.push_back(std::string(base) + "_sub" + std::to_string(k));
        }
      }
      return v;
    }
    case Algorithm::Soto:
      if (grid) return {"self", "team"};
      return {"triage_self", "triage_team", "escort_self", "escort_team", "doctor_self",
              "doctor_team"};
  }
  return {};
}

void write_metric_csv(const std::string& path, const ExperimentConfig& cfg,
                      const std::vector<EpisodeRow>& rows) {
  CsvWriter w(path, metric_csv_columns());
  std::string algo = to_string(cfg.algorithm);
  std::string env = to_string(cfg.environment);
  for (const EpisodeRow& r : rows) {
    std::vector<std::string> cells = {r.phase,
                                      std::to_string(r.episode),
                                      std::to_string(r.seed),
                                      r.config_hash,
                                      algo,
                                      env,
                                      csv_num(r.mean_reward),
                                      csv_num(r.disparity),
                                      csv_num(r.dp),
                                      csv_num(r.penalty),
                                      csv_num(r.lambda),
                                      csv_num(r.objective)};
    if (r.hs) {
      cells.push_back(std::to_string(r.hs->arrivals));
      cells.push_back(std::to_string(r.hs->treated));
      cells.push_back(r.hs->pct_perfect ? csv_num(*r.hs->pct_perfect) : "");
      cells.push_back(r.hs->pct_backup ? csv_num(*r.hs->pct_backup) : "");
      cells.push_back(r.hs->pct_incorrect ? csv_num(*r.hs->pct_incorrect) : "");
      cells.push_back(csv_num(r.hs->mean_escort_wait));
      cells.push_back(csv_num(r.hs->mean_escort_travel));
      cells.push_back(std::to_string(r.hs->swing_moves));
    } else {
      for (int i = 0; i < 8; ++i) cells.emplace_back();
    }
    w.row(cells);
  }
}

void write_report_csv(const RunRecord& rec) {
  const ExperimentConfig& cfg = rec.config;
  std::string path = seed_dir(cfg, rec.seed) + "/report.csv";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "config_hash,seed,algorithm,environment,metric,alpha,beta,soto_alpha,"
      << FairnessReport::csv_header() << "\n";
  out << rec.config_hash << ',' << rec.seed << ',' << to_string(cfg.algorithm) << ','
      << to_string(cfg.environment) << ',' << to_string(cfg.penalty.metric) << ','
      << csv_num(cfg.penalty.alpha) << ',' << csv_num(cfg.penalty.beta) << ','
      << (cfg.algorithm == Algorithm::Soto ? csv_num(cfg.soto.alpha_fairness) : std::string())
      << ',' << rec.final_report.csv_row() << "\n";
}

}  // namespace

std::string run_dir(const ExperimentConfig& cfg) {
  return cfg.output_dir + "/" + config_hash(cfg);
}

std::string seed_dir(const ExperimentConfig& cfg, std::uint64_t seed) {
  return run_dir(cfg) + "/seed" + std::to_string(seed);
}

std::string run_label(const ExperimentConfig& cfg) {
  switch (cfg.algorithm) {
    case Algorithm::FairPpo:
      return "fairppo " + to_string(cfg.penalty.metric) + " a" + csv_num(cfg.penalty.alpha) +
             " b" + csv_num(cfg.penalty.beta);
    case Algorithm::Ppo: return "ppo";
    case Algorithm::Fen: return "fen";
    case Algorithm::Soto: return "soto a" + csv_num(cfg.soto.alpha_fairness);
  }
  return "?";
}

std::vector<std::string> metric_csv_columns() {
  return {"phase",        "episode",     "seed",
          "config_hash",  "algorithm",   "environment",
          "mean_reward",  "disparity",   "dp",
          "penalty",      "lambda",      "objective",
          "arrivals",     "treated",     "pct_perfect",
          "pct_backup",   "pct_incorrect", "mean_escort_wait",
          "mean_escort_travel", "swing_moves"};
}

RunRecord train(const ExperimentConfig& config, std::uint64_t seed) {
  ExperimentConfig cfg = config;
  normalize_config(cfg);
  cfg.validate();
  std::string hash = config_hash(cfg);
  std::string rdir = run_dir(cfg);
  std::string sdir = seed_dir(cfg, seed);
  fs::create_directories(sdir);
  save_config_file(cfg, rdir + "/config.json");

  auto t0 = std::chrono::steady_clock::now();
  TrainOutput out = run_training(cfg, seed, hash, sdir);
  auto t1 = std::chrono::steady_clock::now();

  RunRecord rec;
  rec.config = cfg;
  rec.config_hash = hash;
  rec.seed = seed;
  rec.rows = std::move(out.rows);
  rec.trace = std::move(out.trace);
  rec.wall_clock_sec = std::chrono::duration<double>(t1 - t0).count();
  for (const auto& [name, net] : out.nets) {
    std::string path = sdir + "/" + name + ".ckpt";
    save_actor_critic(path, net);
    rec.checkpoint_paths.push_back(path);
  }
  rec.metrics_csv_path = sdir + "/train_metrics.csv";
  write_metric_csv(rec.metrics_csv_path, cfg, rec.rows);
  return rec;
}

RunRecord evaluate(const ExperimentConfig& config, std::uint64_t seed,
                   const std::string& checkpoint_dir) {
  ExperimentConfig cfg = config;
  normalize_config(cfg);
  cfg.validate();
  std::string hash = config_hash(cfg);
  std::string sdir = seed_dir(cfg, seed);
  std::string cdir = checkpoint_dir.empty() ? sdir : checkpoint_dir;
  fs::create_directories(sdir);

  NetMap nets;
  for (const std::string& name : learner_names(cfg))
    nets.emplace(name, load_actor_critic(cdir + "/" + name + ".ckpt"));

  auto t0 = std::chrono::steady_clock::now();
  EvalOutput out = run_evaluation(cfg, seed, hash, nets);
  auto t1 = std::chrono::steady_clock::now();

  RunRecord rec;
  rec.config = cfg;
  rec.config_hash = hash;
  rec.seed = seed;
  rec.rows = std::move(out.rows);
  rec.trace = std::move(out.trace);
  rec.final_report = out.report;
  rec.wall_clock_sec = std::chrono::duration<double>(t1 - t0).count();
  for (const std::string& name : learner_names(cfg))
    rec.checkpoint_paths.push_back(cdir + "/" + name + ".ckpt");
  rec.metrics_csv_path = sdir + "/eval_metrics.csv";
  write_metric_csv(rec.metrics_csv_path, cfg, rec.rows);
  write_report_csv(rec);
  return rec;
}

SweepResult sweep(const ExperimentConfig& base, const SweepGrid& grid) {
  ExperimentConfig b = base;
  normalize_config(b);
  b.validate();

  std::vector<ExperimentConfig> points;
  if (b.algorithm == Algorithm::FairPpo) {
    bool has_baseline = false;
    for (double a : grid.alphas)
      for (double be : grid.betas) {
        ExperimentConfig p = b;
        p.penalty.alpha = a;
        p.penalty.beta = be;
        if (a == 0.0 && be == 0.0) has_baseline = true;
        points.push_back(std::move(p));
      }
    if (!has_baseline) {
      ExperimentConfig p = b;
      p.penalty.alpha = 0.0;
      p.penalty.beta = 0.0;
      points.insert(points.begin(), std::move(p));
    }
  } else if (b.algorithm == Algorithm::Soto) {
    for (double a : grid.soto_alphas) {
      ExperimentConfig p = b;
      p.soto.alpha_fairness = a;
      points.push_back(std::move(p));
    }
  } else {
    points.push_back(b);
  }

  SweepResult res;
  std::string baseline_hash;
  for (ExperimentConfig& p : points) {
    normalize_config(p);
    std::string h = config_hash(p);
    if ((p.algorithm == Algorithm::FairPpo || p.algorithm == Algorithm::Ppo) &&
        p.penalty.alpha == 0.0 && p.penalty.beta == 0.0)
      baseline_hash = h;
    for (std::uint64_t seed : p.seeds) {
      try {
        RunRecord tr = train(p, seed);
        RunRecord ev = evaluate(p, seed);
        ev.rows.insert(ev.rows.begin(), tr.rows.begin(), tr.rows.end());
        ev.trace.insert(ev.trace.begin(), tr.trace.begin(), tr.trace.end());
        ev.wall_clock_sec += tr.wall_clock_sec;
        res.runs.push_back(std::move(ev));
      } catch (const std::exception& e) {
        res.failures.push_back(SweepFailure{h, seed, e.what()});
      }
    }
  }

  if (!baseline_hash.empty()) {
    std::map<std::uint64_t, double> baseline_mean;
    for (const RunRecord& r : res.runs)
      if (r.config_hash == baseline_hash) baseline_mean[r.seed] = r.final_report.mean_reward;
    for (RunRecord& r : res.runs) {
      auto it = baseline_mean.find(r.seed);
      if (it == baseline_mean.end() || it->second == 0.0) continue;
      r.final_report.price_of_fairness =
          price_of_fairness(r.final_report.mean_reward, it->second);
      write_report_csv(r);
    }
  }

  fs::create_directories(b.output_dir);
  res.summary_csv_path = b.output_dir + "/sweep_summary.csv";
  {
    CsvWriter w(res.summary_csv_path,
                {"config_hash", "label", "algorithm", "environment", "metric", "alpha", "beta",
                 "soto_alpha", "seed", "mean_reward", "dp", "cf", "csp_total", "gini", "jfi",
                 "nnsw", "price_of_fairness"});
    for (const RunRecord& r : res.runs) {
      const ExperimentConfig& c = r.config;
      const FairnessReport& f = r.final_report;
      w.row({r.config_hash, run_label(c), to_string(c.algorithm), to_string(c.environment),
             to_string(c.penalty.metric), csv_num(c.penalty.alpha), csv_num(c.penalty.beta),
             c.algorithm == Algorithm::Soto ? csv_num(c.soto.alpha_fairness) : std::string(),
             std::to_string(r.seed), csv_num(f.mean_reward), csv_num(f.dp),
             f.cf ? csv_num(*f.cf) : std::string(), csv_num(f.csp_total), csv_num(f.gini),
             csv_num(f.jfi), csv_num(f.nnsw),
             f.price_of_fairness ? csv_num(*f.price_of_fairness) : std::string()});
    }
  }

  struct PointAgg {
    std::string hash;
    std::string lab;
    const ExperimentConfig* cfg = nullptr;
    std::vector<double> dps;
    std::vector<double> rewards;
  };
  std::vector<PointAgg> aggs;
  for (const RunRecord& r : res.runs) {
    PointAgg* agg = nullptr;
    for (PointAgg& a : aggs)
      if (a.hash == r.config_hash) agg = &a;
    if (!agg) {
      aggs.push_back(PointAgg{r.config_hash, run_label(r.config), &r.config, {}, {}});
      agg = &aggs.back();
    }
    agg->dps.push_back(r.final_report.dp);
    agg->rewards.push_back(r.final_report.mean_reward);
  }
  std::vector<std::pair<double, const PointAgg*>> ordered;
  for (const PointAgg& a : aggs) ordered.emplace_back(median_of(a.dps), &a);
  std::sort(ordered.begin(), ordered.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first < y.first;
    return x.second->hash < y.second->hash;
  });

  res.medians_csv_path = b.output_dir + "/sweep_medians.csv";
  {
    CsvWriter w(res.medians_csv_path,
                {"config_hash", "label", "algorithm", "alpha", "beta", "soto_alpha", "seed_count",
                 "median_dp", "median_mean_reward"});
    for (const auto& [med, a] : ordered) {
      const ExperimentConfig& c = *a->cfg;
      w.row({a->hash, a->lab, to_string(c.algorithm), csv_num(c.penalty.alpha),
             csv_num(c.penalty.beta),
             c.algorithm == Algorithm::Soto ? csv_num(c.soto.alpha_fairness) : std::string(),
             std::to_string(a->dps.size()), csv_num(med), csv_num(median_of(a->rewards))});
    }
  }
  if (!ordered.empty()) res.best_config_hash = ordered.front().second->hash;
  return res;
}

std::vector<std::string> export_plots(const std::vector<RunRecord>& records,
                                      const std::string& out_dir) {
  if (records.empty()) throw std::invalid_argument("no records to plot");
  fs::create_directories(out_dir);
  std::vector<std::string> paths;

  const char* curve_phase = "train";
  bool any_train = false;
  for (const RunRecord& r : records)
    for (const EpisodeRow& row : r.rows)
      if (row.phase == "train") any_train = true;
  if (!any_train) curve_phase = "eval";

  std::vector<SvgSeries> series;
  {
    std::string csv_path = out_dir + "/training_curves.csv";
    CsvWriter w(csv_path, {"label", "seed", "episode", "dp"});
    for (const RunRecord& r : records) {
      SvgSeries s;
      s.label = run_label(r.config) + " s" + std::to_string(r.seed);
      for (const EpisodeRow& row : r.rows) {
        if (row.phase != curve_phase) continue;
        s.x.push_back(row.episode);
        s.y.push_back(row.dp);
        w.row({run_label(r.config), std::to_string(r.seed), std::to_string(row.episode),
               csv_num(row.dp)});
      }
      if (!s.x.empty()) series.push_back(std::move(s));
    }
    paths.push_back(csv_path);
  }
  if (!series.empty()) {
    std::string svg_path = out_dir + "/training_curves.svg";
    std::ofstream(svg_path, std::ios::binary)
        << svg_line_chart(series, "Group return disparity during training", "episode",
                          "demographic disparity");
    paths.push_back(svg_path);
  }

  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunRecord*>> by_hash;
  for (const RunRecord& r : records) {
    if (!by_hash.count(r.config_hash)) order.push_back(r.config_hash);
    by_hash[r.config_hash].push_back(&r);
  }

  std::vector<BoxStats> boxes;
  {
    std::string csv_path = out_dir + "/disparity_box.csv";
    CsvWriter w(csv_path, {"label", "seed", "dp"});
    for (const std::string& h : order) {
      std::vector<double> vals;
      for (const RunRecord* r : by_hash[h]) {
        vals.push_back(r->final_report.dp);
        w.row({run_label(r->config), std::to_string(r->seed), csv_num(r->final_report.dp)});
      }
      boxes.push_back(box_stats(run_label(by_hash[h].front()->config), vals));
    }
    paths.push_back(csv_path);
  }
  {
    std::string svg_path = out_dir + "/disparity_box.svg";
    std::ofstream(svg_path, std::ios::binary)
        << svg_boxplot(boxes, "Final demographic disparity by configuration",
                       "demographic disparity");
    paths.push_back(svg_path);
  }

  std::vector<ParetoPoint> points;
  for (const std::string& h : order) {
    std::vector<double> dps, rewards;
    for (const RunRecord* r : by_hash[h]) {
      dps.push_back(r->final_report.dp);
      rewards.push_back(r->final_report.mean_reward);
    }
    ParetoPoint p;
    p.label = run_label(by_hash[h].front()->config);
    p.disparity = median_of(dps);
    p.mean_reward = median_of(rewards);
    points.push_back(std::move(p));
  }
  mark_nondominated(points);
  {
    std::string csv_path = out_dir + "/pareto.csv";
    CsvWriter w(csv_path, {"label", "median_dp", "median_mean_reward", "nondominated"});
    for (const ParetoPoint& p : points)
      w.row({p.label, csv_num(p.disparity), csv_num(p.mean_reward),
             p.nondominated ? "1" : "0"});
    paths.push_back(csv_path);
  }
  {
    std::string svg_path = out_dir + "/pareto.svg";
    std::ofstream(svg_path, std::ios::binary)
        << svg_pareto(points, "Disparity against mean reward", "median demographic disparity",
                      "median mean reward");
    paths.push_back(svg_path);
  }
  return paths;
}

}  // namespace fairmarl
