#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fairmarl/harness/csv.hpp"
#include "fairmarl/harness/experiment.hpp"

namespace fs = std::filesystem;
namespace fm = fairmarl;

namespace {

struct Opts {
  std::string config_path;
  std::string preset = "desk-ah";
  std::string out;
  std::string algorithm;
  std::string metric;
  std::string lambda_mode;
  double alpha = 0.0;
  double beta = 0.0;
  double soto_alpha = 0.0;
  double lambda_value = 0.0;
  int train_episodes = 0;
  int eval_episodes = 0;
  int checkpoint_every = 0;
  int hidden = 0;
  std::vector<std::uint64_t> seeds;
};

void add_common_options(CLI::App* cmd, Opts& o) {
  cmd->add_option("--config", o.config_path, "JSON experiment config; overrides --preset")
      ->check(CLI::ExistingFile);
  cmd->add_option("--preset", o.preset, "built-in config: desk-ah, desk-hs, paper-ah, paper-hs")
      ->check(CLI::IsMember({"desk-ah", "desk-hs", "paper-ah", "paper-hs"}));
  cmd->add_option("--algorithm", o.algorithm, "fairppo, ppo, fen or soto");
  cmd->add_option("--metric", o.metric, "penalty metric: dp, cf or csp");
  cmd->add_option("--alpha", o.alpha, "retrospective penalty weight");
  cmd->add_option("--beta", o.beta, "prospective penalty weight");
  cmd->add_option("--soto-alpha", o.soto_alpha, "fairness exponent of the two-headed baseline");
  cmd->add_option("--lambda-mode", o.lambda_mode, "dynamic or fixed")
      ->check(CLI::IsMember({"dynamic", "fixed"}));
  cmd->add_option("--lambda", o.lambda_value, "penalty multiplier when --lambda-mode fixed");
  cmd->add_option("--train-episodes", o.train_episodes, "training episodes (days)");
  cmd->add_option("--eval-episodes", o.eval_episodes, "evaluation episodes (days)");
  cmd->add_option("--checkpoint-every", o.checkpoint_every,
                  "also save checkpoints every N episodes");
  cmd->add_option("--hidden", o.hidden, "hidden layer width");
  cmd->add_option("--seeds", o.seeds, "run seeds")->delimiter(',');
  cmd->add_option("--out", o.out, "output directory");
}

fm::ExperimentConfig preset_config(const std::string& name) {
  if (name == "desk-ah") return fm::desk_ah_config();
  if (name == "desk-hs") return fm::desk_hs_config();
  if (name == "paper-ah") return fm::paper_ah_config();
  return fm::paper_hs_config();
}

fm::ExperimentConfig build_config(const Opts& o, CLI::App* cmd) {
  fm::ExperimentConfig cfg =
      cmd->count("--config") ? fm::load_config_file(o.config_path) : preset_config(o.preset);
  if (cmd->count("--algorithm")) cfg.algorithm = fm::algorithm_from_string(o.algorithm);
  if (cmd->count("--metric")) cfg.penalty.metric = fm::fairness_metric_from_string(o.metric);
  if (cmd->count("--alpha")) cfg.penalty.alpha = o.alpha;
  if (cmd->count("--beta")) cfg.penalty.beta = o.beta;
  if (cmd->count("--soto-alpha")) cfg.soto.alpha_fairness = o.soto_alpha;
  if (cmd->count("--lambda-mode"))
    cfg.lambda_mode = o.lambda_mode == "fixed" ? fm::LambdaMode::Fixed : fm::LambdaMode::Dynamic;
  if (cmd->count("--lambda")) cfg.lambda_value = o.lambda_value;
  if (cmd->count("--train-episodes")) cfg.train_episodes = o.train_episodes;
  if (cmd->count("--eval-episodes")) cfg.eval_episodes = o.eval_episodes;
  if (cmd->count("--checkpoint-every")) cfg.checkpoint_every = o.checkpoint_every;
  if (cmd->count("--hidden")) cfg.hidden = o.hidden;
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (cmd->count("--out")) cfg.output_dir = o.out;
  fm::normalize_config(cfg);
  return cfg;
}

std::optional<double> parse_optional(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  return std::stod(cell);
}

std::vector<fm::EpisodeRow> rows_from_csv(const std::string& path) {
  std::vector<fm::EpisodeRow> rows;
  if (!fs::exists(path)) return rows;
  fm::CsvTable t = fm::read_csv(path);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    fm::EpisodeRow e;
    e.phase = t.cell(r, "phase");
    e.episode = std::stoi(t.cell(r, "episode"));
    e.seed = std::stoull(t.cell(r, "seed"));
    e.config_hash = t.cell(r, "config_hash");
    e.mean_reward = std::stod(t.cell(r, "mean_reward"));
    e.disparity = std::stod(t.cell(r, "disparity"));
    e.dp = std::stod(t.cell(r, "dp"));
    e.penalty = std::stod(t.cell(r, "penalty"));
    e.lambda = std::stod(t.cell(r, "lambda"));
    e.objective = std::stod(t.cell(r, "objective"));
    if (!t.cell(r, "arrivals").empty()) {
      fm::HsMetrics m;
      m.arrivals = std::stoi(t.cell(r, "arrivals"));
      m.treated = std::stoi(t.cell(r, "treated"));
      m.pct_perfect = parse_optional(t.cell(r, "pct_perfect"));
      m.pct_backup = parse_optional(t.cell(r, "pct_backup"));
      m.pct_incorrect = parse_optional(t.cell(r, "pct_incorrect"));
      m.mean_escort_wait = std::stod(t.cell(r, "mean_escort_wait"));
      m.mean_escort_travel = std::stod(t.cell(r, "mean_escort_travel"));
      m.swing_moves = std::stoi(t.cell(r, "swing_moves"));
      e.hs = m;
    }
    rows.push_back(std::move(e));
  }
  return rows;
}

fm::FairnessReport report_from_csv(const std::string& path) {
  fm::FairnessReport rep;
  if (!fs::exists(path)) return rep;
  fm::CsvTable t = fm::read_csv(path);
  if (t.rows.empty()) return rep;
  rep.dp = std::stod(t.cell(0, "dp"));
  rep.cf = parse_optional(t.cell(0, "cf"));
  rep.csp_total = std::stod(t.cell(0, "csp_total"));
  rep.gini = std::stod(t.cell(0, "gini"));
  rep.jfi = std::stod(t.cell(0, "jfi"));
  rep.nnsw = std::stod(t.cell(0, "nnsw"));
  rep.price_of_fairness = parse_optional(t.cell(0, "price_of_fairness"));
  rep.mean_reward = std::stod(t.cell(0, "mean_reward"));
  return rep;
}

// Rebuilds run records from the artifacts a previous train/eval/sweep wrote.
std::vector<fm::RunRecord> load_records(const std::string& out_dir) {
  std::vector<fm::RunRecord> records;
  if (!fs::is_directory(out_dir)) return records;
  std::vector<fs::path> run_dirs;
  for (const auto& entry : fs::directory_iterator(out_dir))
    if (entry.is_directory() && fs::exists(entry.path() / "config.json"))
      run_dirs.push_back(entry.path());
  std::sort(run_dirs.begin(), run_dirs.end());
  for (const fs::path& rd : run_dirs) {
    fm::ExperimentConfig cfg = fm::load_config_file((rd / "config.json").string());
    std::vector<std::pair<std::uint64_t, fs::path>> seed_dirs;
    for (const auto& entry : fs::directory_iterator(rd)) {
      std::string name = entry.path().filename().string();
      if (entry.is_directory() && name.rfind("seed", 0) == 0)
        seed_dirs.emplace_back(std::stoull(name.substr(4)), entry.path());
    }
    std::sort(seed_dirs.begin(), seed_dirs.end());
    for (const auto& [seed, sd] : seed_dirs) {
      fm::RunRecord rec;
      rec.config = cfg;
      rec.config_hash = rd.filename().string();
      rec.seed = seed;
      rec.rows = rows_from_csv((sd / "train_metrics.csv").string());
      std::vector<fm::EpisodeRow> eval_rows = rows_from_csv((sd / "eval_metrics.csv").string());
      rec.rows.insert(rec.rows.end(), eval_rows.begin(), eval_rows.end());
      rec.final_report = report_from_csv((sd / "report.csv").string());
      rec.metrics_csv_path = (sd / "eval_metrics.csv").string();
      if (!rec.rows.empty()) records.push_back(std::move(rec));
    }
  }
  return records;
}

int do_train(const fm::ExperimentConfig& cfg) {
  int failed = 0;
  for (std::uint64_t seed : cfg.seeds) {
    try {
      fm::RunRecord rec = fm::train(cfg, seed);
      std::printf("trained %s seed %llu: %zu episodes in %.1fs -> %s\n",
                  fm::run_label(cfg).c_str(), static_cast<unsigned long long>(seed),
                  rec.rows.size(), rec.wall_clock_sec, rec.metrics_csv_path.c_str());
    } catch (const std::exception& e) {
      std::fprintf(stderr, "train seed %llu failed: %s\n",
                   static_cast<unsigned long long>(seed), e.what());
      ++failed;
    }
  }
  return failed == 0 ? 0 : 1;
}

int do_eval(const fm::ExperimentConfig& cfg, const std::string& checkpoint_dir) {
  int failed = 0;
  for (std::uint64_t seed : cfg.seeds) {
    try {
      fm::RunRecord rec = fm::evaluate(cfg, seed, checkpoint_dir);
      std::printf("evaluated %s seed %llu -> %s\n%s\n", fm::run_label(cfg).c_str(),
                  static_cast<unsigned long long>(seed), rec.metrics_csv_path.c_str(),
                  rec.final_report.pretty().c_str());
    } catch (const std::exception& e) {
      std::fprintf(stderr, "eval seed %llu failed: %s\n",
                   static_cast<unsigned long long>(seed), e.what());
      ++failed;
    }
  }
  return failed == 0 ? 0 : 1;
}

int do_sweep(const fm::ExperimentConfig& cfg, const fm::SweepGrid& grid) {
  fm::SweepResult res = fm::sweep(cfg, grid);
  for (const fm::SweepFailure& f : res.failures)
    std::fprintf(stderr, "run %s seed %llu failed: %s\n", f.config_hash.c_str(),
                 static_cast<unsigned long long>(f.seed), f.error.c_str());
  std::printf("completed %zu runs (%zu failed)\nsummary: %s\nmedians: %s\n", res.runs.size(),
              res.failures.size(), res.summary_csv_path.c_str(), res.medians_csv_path.c_str());
  if (!res.best_config_hash.empty())
    std::printf("lowest median disparity: %s\n", res.best_config_hash.c_str());
  if (!res.runs.empty()) {
    std::vector<std::string> paths = fm::export_plots(res.runs, cfg.output_dir + "/plots");
    std::printf("wrote %zu plot files under %s/plots\n", paths.size(), cfg.output_dir.c_str());
  }
  return res.failures.empty() && !res.runs.empty() ? 0 : 1;
}

int do_plot(const std::string& runs_dir, const std::string& out_dir) {
  std::vector<fm::RunRecord> records = load_records(runs_dir);
  if (records.empty()) {
    std::fprintf(stderr, "no completed runs under %s\n", runs_dir.c_str());
    return 1;
  }
  std::vector<std::string> paths = fm::export_plots(records, out_dir);
  for (const std::string& p : paths) std::printf("wrote %s\n", p.c_str());
  return 0;
}

std::string opt_cell(const std::optional<double>& v) {
  if (!v) return "-";
  return fm::csv_num(*v);
}

int do_report(const std::string& runs_dir) {
  std::vector<fm::RunRecord> records = load_records(runs_dir);
  if (records.empty()) {
    std::fprintf(stderr, "no completed runs under %s\n", runs_dir.c_str());
    return 1;
  }
  std::printf("%-26s %6s %12s %10s %10s %10s %8s %8s %8s %8s\n", "label", "seed", "mean_reward",
              "dp", "cf", "csp", "gini", "jfi", "nnsw", "pof");
  for (const fm::RunRecord& r : records) {
    const fm::FairnessReport& f = r.final_report;
    std::printf("%-26s %6llu %12.4f %10.4f %10s %10.4f %8.4f %8.4f %8.4f %8s\n",
                fm::run_label(r.config).c_str(), static_cast<unsigned long long>(r.seed),
                f.mean_reward, f.dp, opt_cell(f.cf).c_str(), f.csp_total, f.gini, f.jfi, f.nnsw,
                opt_cell(f.price_of_fairness).c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairness-aware multi-agent RL laboratory"};
  app.require_subcommand(1);

  Opts train_opts, eval_opts, sweep_opts;
  std::string checkpoint_dir;
  std::vector<double> sweep_alphas, sweep_betas, sweep_soto_alphas;
  std::string runs_dir = "runs";
  std::string plot_out;

  CLI::App* train_cmd = app.add_subcommand("train", "train one configuration over its seeds");
  add_common_options(train_cmd, train_opts);

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate saved checkpoints");
  add_common_options(eval_cmd, eval_opts);
  eval_cmd->add_option("--checkpoint-dir", checkpoint_dir,
                       "directory holding the checkpoints (defaults to the run's seed dir)");

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "train and evaluate a grid of penalty weights");
  add_common_options(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--alphas", sweep_alphas, "retrospective weights to sweep")
      ->delimiter(',');
  sweep_cmd->add_option("--betas", sweep_betas, "prospective weights to sweep")->delimiter(',');
  sweep_cmd->add_option("--soto-alphas", sweep_soto_alphas, "fairness exponents to sweep")
      ->delimiter(',');

  CLI::App* plot_cmd = app.add_subcommand("plot", "render figures from finished runs");
  plot_cmd->add_option("--runs", runs_dir, "output directory of previous runs");
  plot_cmd->add_option("--out", plot_out, "where to write the figures (default <runs>/plots)");

  CLI::App* report_cmd = app.add_subcommand("report", "print fairness reports of finished runs");
  report_cmd->add_option("--runs", runs_dir, "output directory of previous runs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return do_train(build_config(train_opts, train_cmd));
    if (eval_cmd->parsed()) return do_eval(build_config(eval_opts, eval_cmd), checkpoint_dir);
    if (sweep_cmd->parsed()) {
      fm::SweepGrid grid;
      if (!sweep_alphas.empty()) grid.alphas = sweep_alphas;
      if (!sweep_betas.empty()) grid.betas = sweep_betas;
      if (!sweep_soto_alphas.empty()) grid.soto_alphas = sweep_soto_alphas;
      return do_sweep(build_config(sweep_opts, sweep_cmd), grid);
    }
    if (plot_cmd->parsed())
      return do_plot(runs_dir, plot_out.empty() ? runs_dir + "/plots" : plot_out);
    if (report_cmd->parsed()) return do_report(runs_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
