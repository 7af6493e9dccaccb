#include "fairmarl/harness/config.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fairmarl {

using nlohmann::json;

std::string to_string(EnvKind env) { return env == EnvKind::Ah ? "ah" : "hs"; }

EnvKind env_kind_from_string(const std::string& s) {
  if (s == "ah") return EnvKind::Ah;
  if (s == "hs") return EnvKind::Hs;
  throw std::invalid_argument("unknown environment: " + s);
}

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::FairPpo: return "fairppo";
    case Algorithm::Ppo: return "ppo";
    case Algorithm::Fen: return "fen";
    case Algorithm::Soto: return "soto";
  }
  return "fairppo";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "fairppo") return Algorithm::FairPpo;
  if (s == "ppo") return Algorithm::Ppo;
  if (s == "fen") return Algorithm::Fen;
  if (s == "soto") return Algorithm::Soto;
  throw std::invalid_argument("unknown algorithm: " + s);
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (train_episodes < 1) throw std::invalid_argument("train_episodes must be positive");
  if (eval_episodes < 1) throw std::invalid_argument("eval_episodes must be positive");
  if (eval_episode_length < 0) throw std::invalid_argument("eval_episode_length must be >= 0");
  if (hidden < 1) throw std::invalid_argument("hidden must be positive");
  if (checkpoint_every < 0) throw std::invalid_argument("checkpoint_every must be >= 0");
  if (lambda_value < 0.0) throw std::invalid_argument("lambda_value must be >= 0");
  if (lambda_max <= 0.0) throw std::invalid_argument("lambda_max must be positive");
  if (output_dir.empty()) throw std::invalid_argument("output_dir must be set");
  penalty.validate();
  ppo.validate();
  fen.validate();
  soto.validate();
  ah.validate();
  hs.validate();
  if (algorithm == Algorithm::Ppo && (penalty.alpha != 0.0 || penalty.beta != 0.0))
    throw std::invalid_argument("plain ppo must keep alpha = beta = 0");
}

void normalize_config(ExperimentConfig& cfg) {
  if (cfg.algorithm == Algorithm::Ppo) {
    cfg.penalty.alpha = 0.0;
    cfg.penalty.beta = 0.0;
  }
  if (cfg.penalty.metric == FairnessMetric::CSP && cfg.penalty.lf_domain.empty()) {
    if (cfg.environment == EnvKind::Ah)
      cfg.penalty.lf_domain = {0, 1};
    else
      cfg.penalty.lf_domain = {0, 1, 2};
  }
}

ExperimentConfig desk_ah_config() {
  ExperimentConfig cfg;
  cfg.environment = EnvKind::Ah;
  cfg.ah.n_agents = 8;
  cfg.ah.grid_width = 11;
  cfg.ah.grid_height = 11;
  cfg.ah.n_bushes = 16;
  cfg.ah.episode_length_ts = 300;
  cfg.train_episodes = 150;
  cfg.eval_episodes = 10;
  cfg.fen = fen_ah_config();
  cfg.soto = soto_ah_config(0.9);
  normalize_config(cfg);
  return cfg;
}

ExperimentConfig desk_hs_config() {
  ExperimentConfig cfg;
  cfg.environment = EnvKind::Hs;
  cfg.hs.patients_per_day = 60;
  cfg.hs.clerks = 6;
  cfg.hs.nurses = 8;
  cfg.hs.robots = 4;
  cfg.hs.triage_dispatchers = 6;
  cfg.hs.swing_doctors = 4;
  cfg.hs.ward_doctors_per_ward = 2;
  cfg.train_episodes = 50;
  cfg.eval_episodes = 10;
  cfg.fen = fen_hs_config();
  cfg.soto = soto_hs_config();
  normalize_config(cfg);
  return cfg;
}

ExperimentConfig paper_ah_config() {
  ExperimentConfig cfg;
  cfg.environment = EnvKind::Ah;
  cfg.ah.episode_length_ts = 3000;
  cfg.eval_episode_length = 1500;
  cfg.train_episodes = 1000;
  cfg.eval_episodes = 500;
  cfg.fen = fen_ah_config();
  cfg.soto = soto_ah_config(0.9);
  normalize_config(cfg);
  return cfg;
}

ExperimentConfig paper_hs_config() {
  ExperimentConfig cfg;
  cfg.environment = EnvKind::Hs;
  cfg.train_episodes = 2000;
  cfg.eval_episodes = 500;
  cfg.fen = fen_hs_config();
  cfg.soto = soto_hs_config();
  normalize_config(cfg);
  return cfg;
}

namespace {

json ppo_to_json(const PpoConfig& p) {
  return json{{"gamma", p.gamma},
              {"gae_lambda", p.gae_lambda},
              {"clip_epsilon", p.clip_epsilon},
              {"c1", p.c1},
              {"c2", p.c2},
              {"epochs", p.epochs},
              {"minibatch_size", p.minibatch_size},
              {"learning_rate", p.learning_rate}};
}

PpoConfig ppo_from_json(const json& j, PpoConfig p) {
  p.gamma = j.value("gamma", p.gamma);
  p.gae_lambda = j.value("gae_lambda", p.gae_lambda);
  p.clip_epsilon = j.value("clip_epsilon", p.clip_epsilon);
  p.c1 = j.value("c1", p.c1);
  p.c2 = j.value("c2", p.c2);
  p.epochs = j.value("epochs", p.epochs);
  p.minibatch_size = j.value("minibatch_size", p.minibatch_size);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  return p;
}

json ah_to_json(const AhConfig& a) {
  return json{{"grid_width", a.grid_width},
              {"grid_height", a.grid_height},
              {"n_agents", a.n_agents},
              {"n_bushes", a.n_bushes},
              {"red_fraction", a.red_fraction},
              {"berry_regrowth_ts", a.berry_regrowth_ts},
              {"bush_lifespan_ts", a.bush_lifespan_ts},
              {"bush_growth_rate_ts", a.bush_growth_rate_ts},
              {"episode_length_ts", a.episode_length_ts},
              {"impaired_move_period", a.impaired_move_period},
              {"observe_z", a.observe_z},
              {"r_eat_match", a.r_eat_match},
              {"r_eat_other", a.r_eat_other},
              {"r_ripen_match", a.r_ripen_match},
              {"r_ripen_other", a.r_ripen_other},
              {"r_change_from_opposing", a.r_change_from_opposing},
              {"r_change_other", a.r_change_other},
              {"r_plant", a.r_plant},
              {"r_block_opposing", a.r_block_opposing},
              {"r_block_same", a.r_block_same}};
}

AhConfig ah_from_json(const json& j, AhConfig a) {
  a.grid_width = j.value("grid_width", a.grid_width);
  a.grid_height = j.value("grid_height", a.grid_height);
  a.n_agents = j.value("n_agents", a.n_agents);
  a.n_bushes = j.value("n_bushes", a.n_bushes);
  a.red_fraction = j.value("red_fraction", a.red_fraction);
  a.berry_regrowth_ts = j.value("berry_regrowth_ts", a.berry_regrowth_ts);
  a.bush_lifespan_ts = j.value("bush_lifespan_ts", a.bush_lifespan_ts);
  a.bush_growth_rate_ts = j.value("bush_growth_rate_ts", a.bush_growth_rate_ts);
  a.episode_length_ts = j.value("episode_length_ts", a.episode_length_ts);
  a.impaired_move_period = j.value("impaired_move_period", a.impaired_move_period);
  a.observe_z = j.value("observe_z", a.observe_z);
  a.r_eat_match = j.value("r_eat_match", a.r_eat_match);
  a.r_eat_other = j.value("r_eat_other", a.r_eat_other);
  a.r_ripen_match = j.value("r_ripen_match", a.r_ripen_match);
  a.r_ripen_other = j.value("r_ripen_other", a.r_ripen_other);
  a.r_change_from_opposing = j.value("r_change_from_opposing", a.r_change_from_opposing);
  a.r_change_other = j.value("r_change_other", a.r_change_other);
  a.r_plant = j.value("r_plant", a.r_plant);
  a.r_block_opposing = j.value("r_block_opposing", a.r_block_opposing);
  a.r_block_same = j.value("r_block_same", a.r_block_same);
  return a;
}

// Distances stay at the built-in layout; only scalar knobs serialize.
json hs_to_json(const HsConfig& h) {
  return json{{"clerks", h.clerks},
              {"nurses", h.nurses},
              {"robots", h.robots},
              {"triage_dispatchers", h.triage_dispatchers},
              {"swing_doctors", h.swing_doctors},
              {"ward_doctors_per_ward", h.ward_doctors_per_ward},
              {"patients_per_day", h.patients_per_day},
              {"day_length_min", h.day_length_min},
              {"peak_start_min", h.peak_start_min},
              {"peak_end_min", h.peak_end_min},
              {"peak_rate_factor", h.peak_rate_factor},
              {"clerk_service_min", h.clerk_service_min},
              {"triage_service_min", h.triage_service_min},
              {"treatment_mean_min", h.treatment_mean_min},
              {"treatment_max_min", h.treatment_max_min},
              {"decision_tick_min", h.decision_tick_min},
              {"nurse_speed", h.nurse_speed},
              {"robot_speed", h.robot_speed},
              {"r_incorrect", h.r_incorrect},
              {"routing_credit_scale", h.routing_credit_scale},
              {"patient_completion_scale", h.patient_completion_scale},
              {"patient_wait_coeff", h.patient_wait_coeff},
              {"nurse_skill", h.nurse_skill},
              {"robot_skill", h.robot_skill},
              {"escort_proximity_scale", h.escort_proximity_scale},
              {"escort_wait_coeff", h.escort_wait_coeff},
              {"escort_pending_coeff", h.escort_pending_coeff},
              {"doctor_completion_coeff", h.doctor_completion_coeff},
              {"doctor_queue_coeff", h.doctor_queue_coeff},
              {"doctor_move_coeff", h.doctor_move_coeff}};
}

HsConfig hs_from_json(const json& j, HsConfig h) {
  h.clerks = j.value("clerks", h.clerks);
  h.nurses = j.value("nurses", h.nurses);
  h.robots = j.value("robots", h.robots);
  h.triage_dispatchers = j.value("triage_dispatchers", h.triage_dispatchers);
  h.swing_doctors = j.value("swing_doctors", h.swing_doctors);
  h.ward_doctors_per_ward = j.value("ward_doctors_per_ward", h.ward_doctors_per_ward);
  h.patients_per_day = j.value("patients_per_day", h.patients_per_day);
  h.day_length_min = j.value("day_length_min", h.day_length_min);
  h.peak_start_min = j.value("peak_start_min", h.peak_start_min);
  h.peak_end_min = j.value("peak_end_min", h.peak_end_min);
  h.peak_rate_factor = j.value("peak_rate_factor", h.peak_rate_factor);
  h.clerk_service_min = j.value("clerk_service_min", h.clerk_service_min);
  h.triage_service_min = j.value("triage_service_min", h.triage_service_min);
  h.treatment_mean_min = j.value("treatment_mean_min", h.treatment_mean_min);
  h.treatment_max_min = j.value("treatment_max_min", h.treatment_max_min);
  h.decision_tick_min = j.value("decision_tick_min", h.decision_tick_min);
  h.nurse_speed = j.value("nurse_speed", h.nurse_speed);
  h.robot_speed = j.value("robot_speed", h.robot_speed);
  h.r_incorrect = j.value("r_incorrect", h.r_incorrect);
  h.routing_credit_scale = j.value("routing_credit_scale", h.routing_credit_scale);
  h.patient_completion_scale = j.value("patient_completion_scale", h.patient_completion_scale);
  h.patient_wait_coeff = j.value("patient_wait_coeff", h.patient_wait_coeff);
  h.nurse_skill = j.value("nurse_skill", h.nurse_skill);
  h.robot_skill = j.value("robot_skill", h.robot_skill);
  h.escort_proximity_scale = j.value("escort_proximity_scale", h.escort_proximity_scale);
  h.escort_wait_coeff = j.value("escort_wait_coeff", h.escort_wait_coeff);
  h.escort_pending_coeff = j.value("escort_pending_coeff", h.escort_pending_coeff);
  h.doctor_completion_coeff = j.value("doctor_completion_coeff", h.doctor_completion_coeff);
  h.doctor_queue_coeff = j.value("doctor_queue_coeff", h.doctor_queue_coeff);
  h.doctor_move_coeff = j.value("doctor_move_coeff", h.doctor_move_coeff);
  return h;
}

json config_to_json_object(const ExperimentConfig& cfg) {
  json j;
  j["environment"] = to_string(cfg.environment);
  j["algorithm"] = to_string(cfg.algorithm);
  j["penalty"] = json{{"metric", to_string(cfg.penalty.metric)},
                      {"alpha", cfg.penalty.alpha},
                      {"beta", cfg.penalty.beta},
                      {"lf_domain", cfg.penalty.lf_domain}};
  j["lambda"] = json{{"mode", cfg.lambda_mode == LambdaMode::Dynamic ? "dynamic" : "fixed"},
                     {"value", cfg.lambda_value},
                     {"max", cfg.lambda_max}};
  j["seeds"] = cfg.seeds;
  j["train_episodes"] = cfg.train_episodes;
  j["eval_episodes"] = cfg.eval_episodes;
  j["eval_episode_length"] = cfg.eval_episode_length;
  j["hidden"] = cfg.hidden;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["deterministic_eval"] = cfg.deterministic_eval;
  j["ppo"] = ppo_to_json(cfg.ppo);
  j["fen"] = json{{"k_sub", cfg.fen.k_sub},
                  {"t_macro", cfg.fen.t_macro},
                  {"reward_scale_c", cfg.fen.reward_scale_c},
                  {"fairness_epsilon", cfg.fen.fairness_epsilon},
                  {"ppo", ppo_to_json(cfg.fen.ppo)}};
  j["soto"] = json{{"alpha_fairness", cfg.soto.alpha_fairness},
                   {"beta_proportion", cfg.soto.beta_proportion},
                   {"ppo", ppo_to_json(cfg.soto.ppo)}};
  j["ah"] = ah_to_json(cfg.ah);
  j["hs"] = hs_to_json(cfg.hs);
  j["output_dir"] = cfg.output_dir;
  return j;
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
  return config_to_json_object(cfg).dump(2) + "\n";
}

ExperimentConfig config_from_json_text(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig cfg;
  cfg.environment = env_kind_from_string(j.value("environment", to_string(cfg.environment)));
  cfg.algorithm = algorithm_from_string(j.value("algorithm", to_string(cfg.algorithm)));
  if (j.contains("penalty")) {
    const json& p = j["penalty"];
    cfg.penalty.metric = fairness_metric_from_string(p.value("metric", std::string("dp")));
    cfg.penalty.alpha = p.value("alpha", 0.0);
    cfg.penalty.beta = p.value("beta", 0.0);
    if (p.contains("lf_domain"))
      cfg.penalty.lf_domain = std::set<int>(p["lf_domain"].begin(), p["lf_domain"].end());
  }
  if (j.contains("lambda")) {
    const json& l = j["lambda"];
    std::string mode = l.value("mode", std::string("dynamic"));
    if (mode == "dynamic")
      cfg.lambda_mode = LambdaMode::Dynamic;
    else if (mode == "fixed")
      cfg.lambda_mode = LambdaMode::Fixed;
    else
      throw std::invalid_argument("unknown lambda mode: " + mode);
    cfg.lambda_value = l.value("value", cfg.lambda_value);
    cfg.lambda_max = l.value("max", cfg.lambda_max);
  }
  if (j.contains("seeds"))
    cfg.seeds = std::vector<std::uint64_t>(j["seeds"].begin(), j["seeds"].end());
  cfg.train_episodes = j.value("train_episodes", cfg.train_episodes);
  cfg.eval_episodes = j.value("eval_episodes", cfg.eval_episodes);
  cfg.eval_episode_length = j.value("eval_episode_length", cfg.eval_episode_length);
  cfg.hidden = j.value("hidden", cfg.hidden);
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  cfg.deterministic_eval = j.value("deterministic_eval", cfg.deterministic_eval);
  if (j.contains("ppo")) cfg.ppo = ppo_from_json(j["ppo"], cfg.ppo);
  cfg.fen = cfg.environment == EnvKind::Ah ? fen_ah_config() : fen_hs_config();
  cfg.soto = cfg.environment == EnvKind::Ah ? soto_ah_config(0.9) : soto_hs_config();
  if (j.contains("fen")) {
    const json& f = j["fen"];
    cfg.fen.k_sub = f.value("k_sub", cfg.fen.k_sub);
    cfg.fen.t_macro = f.value("t_macro", cfg.fen.t_macro);
    cfg.fen.reward_scale_c = f.value("reward_scale_c", cfg.fen.reward_scale_c);
    cfg.fen.fairness_epsilon = f.value("fairness_epsilon", cfg.fen.fairness_epsilon);
    if (f.contains("ppo")) cfg.fen.ppo = ppo_from_json(f["ppo"], cfg.fen.ppo);
  }
  if (j.contains("soto")) {
    const json& s = j["soto"];
    cfg.soto.alpha_fairness = s.value("alpha_fairness", cfg.soto.alpha_fairness);
    cfg.soto.beta_proportion = s.value("beta_proportion", cfg.soto.beta_proportion);
    if (s.contains("ppo")) cfg.soto.ppo = ppo_from_json(s["ppo"], cfg.soto.ppo);
  }
  if (j.contains("ah")) cfg.ah = ah_from_json(j["ah"], cfg.ah);
  if (j.contains("hs")) cfg.hs = hs_from_json(j["hs"], cfg.hs);
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  normalize_config(cfg);
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json_text(buf.str());
}

void save_config_file(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << config_to_json(cfg);
  if (!out) throw std::runtime_error("write failed on " + path);
}

std::string config_hash(const ExperimentConfig& cfg) {
  json j = config_to_json_object(cfg);
  j.erase("seeds");
  j.erase("output_dir");
  std::string canonical = j.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace fairmarl
