#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unistd.h>
#include <vector>

#include "fairmarl/fairness.hpp"
#include "fairmarl/harness/config.hpp"
#include "fairmarl/harness/csv.hpp"
#include "fairmarl/harness/experiment.hpp"
#include "fairmarl/harness/svg_plot.hpp"
#include "fairmarl/rng.hpp"

using namespace fairmarl;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("fairmarl_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny_ah(const std::string& out) {
  ExperimentConfig cfg = desk_ah_config();
  cfg.ah.n_agents = 4;
  cfg.ah.grid_width = 7;
  cfg.ah.grid_height = 7;
  cfg.ah.n_bushes = 6;
  cfg.ah.episode_length_ts = 40;
  cfg.train_episodes = 2;
  cfg.eval_episodes = 1;
  cfg.hidden = 16;
  cfg.seeds = {1, 2};
  cfg.output_dir = out;
  normalize_config(cfg);
  return cfg;
}

ExperimentConfig tiny_hs(const std::string& out) {
  ExperimentConfig cfg = desk_hs_config();
  cfg.hs.patients_per_day = 10;
  cfg.hs.clerks = 2;
  cfg.hs.nurses = 2;
  cfg.hs.robots = 1;
  cfg.hs.triage_dispatchers = 2;
  cfg.hs.swing_doctors = 2;
  cfg.hs.ward_doctors_per_ward = 1;
  cfg.hs.day_length_min = 120.0;
  cfg.hs.peak_start_min = 30.0;
  cfg.hs.peak_end_min = 60.0;
  cfg.train_episodes = 1;
  cfg.eval_episodes = 1;
  cfg.hidden = 8;
  cfg.seeds = {1};
  cfg.output_dir = out;
  normalize_config(cfg);
  return cfg;
}

}  // namespace

TEST_CASE("algorithm and environment labels round-trip") {
  for (EnvKind e : {EnvKind::Ah, EnvKind::Hs}) {
    CHECK(env_kind_from_string(to_string(e)) == e);
  }
  for (Algorithm a : {Algorithm::FairPpo, Algorithm::Ppo, Algorithm::Fen, Algorithm::Soto}) {
    CHECK(algorithm_from_string(to_string(a)) == a);
  }
  CHECK_THROWS(env_kind_from_string("swamp"));
  CHECK_THROWS(algorithm_from_string("dqn"));
}

TEST_CASE("configs serialize to json and back without drift") {
  ExperimentConfig cfg = desk_ah_config();
  cfg.algorithm = Algorithm::FairPpo;
  cfg.penalty.metric = FairnessMetric::CSP;
  cfg.penalty.alpha = 0.5;
  cfg.penalty.beta = 0.25;
  cfg.lambda_mode = LambdaMode::Fixed;
  cfg.lambda_value = 2.5;
  cfg.hidden = 24;
  cfg.ppo.learning_rate = 3e-4;
  cfg.seeds = {7, 8};
  normalize_config(cfg);

  ExperimentConfig back = config_from_json_text(config_to_json(cfg));
  CHECK(back.environment == cfg.environment);
  CHECK(back.algorithm == cfg.algorithm);
  CHECK(back.penalty.metric == cfg.penalty.metric);
  CHECK(back.penalty.alpha == cfg.penalty.alpha);
  CHECK(back.penalty.beta == cfg.penalty.beta);
  CHECK(back.penalty.lf_domain == cfg.penalty.lf_domain);
  CHECK(back.lambda_mode == cfg.lambda_mode);
  CHECK(back.lambda_value == cfg.lambda_value);
  CHECK(back.hidden == cfg.hidden);
  CHECK(back.ppo.learning_rate == cfg.ppo.learning_rate);
  CHECK(back.seeds == cfg.seeds);
  CHECK(back.ah.n_agents == cfg.ah.n_agents);
  CHECK(back.hs.patients_per_day == cfg.hs.patients_per_day);
  CHECK(config_hash(back) == config_hash(cfg));

  SUBCASE("file save and load match the in-memory form") {
    TempDir tmp("cfgio");
    std::string path = tmp.str() + "/config.json";
    save_config_file(cfg, path);
    ExperimentConfig loaded = load_config_file(path);
    CHECK(config_hash(loaded) == config_hash(cfg));
    CHECK(loaded.seeds == cfg.seeds);
  }
  SUBCASE("garbage json is rejected") {
    CHECK_THROWS(config_from_json_text("not json at all"));
  }
}

TEST_CASE("config hash names the experiment, not the run") {
  ExperimentConfig cfg = desk_ah_config();
  std::string h = config_hash(cfg);
  CHECK(h.size() == 16);
  CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);

  ExperimentConfig other = cfg;
  other.seeds = {42};
  other.output_dir = "elsewhere";
  CHECK(config_hash(other) == h);

  other.penalty.alpha = 0.75;
  CHECK(config_hash(other) != h);

  ExperimentConfig hs = desk_hs_config();
  CHECK(config_hash(hs) != h);
}

TEST_CASE("normalization fills environment blanks") {
  ExperimentConfig cfg = desk_ah_config();
  cfg.algorithm = Algorithm::Ppo;
  cfg.penalty.alpha = 0.9;
  cfg.penalty.beta = 0.9;
  normalize_config(cfg);
  CHECK(cfg.penalty.alpha == 0.0);
  CHECK(cfg.penalty.beta == 0.0);
  cfg.validate();

  ExperimentConfig csp_ah = desk_ah_config();
  csp_ah.penalty.metric = FairnessMetric::CSP;
  csp_ah.penalty.lf_domain.clear();
  normalize_config(csp_ah);
  CHECK(csp_ah.penalty.lf_domain == std::set<int>{0, 1});

  ExperimentConfig csp_hs = desk_hs_config();
  csp_hs.penalty.metric = FairnessMetric::CSP;
  csp_hs.penalty.lf_domain.clear();
  normalize_config(csp_hs);
  CHECK(csp_hs.penalty.lf_domain == std::set<int>{0, 1, 2});
}

TEST_CASE("presets validate at their scales") {
  ExperimentConfig da = desk_ah_config();
  da.validate();
  CHECK(da.ah.n_agents == 8);
  CHECK(da.ah.grid_width == 11);
  CHECK(da.ah.n_bushes == 16);
  CHECK(da.ah.episode_length_ts == 300);
  CHECK(da.train_episodes == 150);
  CHECK(da.eval_episodes == 10);

  ExperimentConfig dh = desk_hs_config();
  dh.validate();
  CHECK(dh.hs.patients_per_day == 60);
  CHECK(dh.train_episodes == 50);

  ExperimentConfig pa = paper_ah_config();
  pa.validate();
  CHECK(pa.ah.episode_length_ts == 3000);
  CHECK(pa.eval_episode_length == 1500);
  CHECK(pa.train_episodes == 1000);
  CHECK(pa.eval_episodes == 500);

  ExperimentConfig ph = paper_hs_config();
  ph.validate();
  CHECK(ph.hs.patients_per_day == 300);
  CHECK(ph.train_episodes == 2000);

  SUBCASE("validation catches inconsistent settings") {
    ExperimentConfig bad = desk_ah_config();
    bad.train_episodes = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = desk_ah_config();
    bad.seeds.clear();
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = desk_ah_config();
    bad.algorithm = Algorithm::Ppo;
    bad.penalty.alpha = 0.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  }
}

TEST_CASE("csv cells, writers, and readers round-trip") {
  CHECK(csv_num(0.0) == "0");
  CHECK(csv_num(0.5) == "0.5");
  CHECK(csv_num(-3.0) == "-3");
  for (double v : {0.1, 1.0 / 3.0, 123456.789, 1e-9, -2.5e17}) {
    CHECK(std::stod(csv_num(v)) == doctest::Approx(v).epsilon(1e-9));
  }

  TempDir tmp("csvio");
  std::string path = tmp.str() + "/t.csv";
  {
    CsvWriter w(path, {"a", "b", "c"});
    w.row({"1", "x", "2.5"});
    w.row({"2", "", "-1"});
    CHECK_THROWS_AS(w.row({"only", "two"}), std::logic_error);
  }
  CsvTable t = read_csv(path);
  CHECK(t.columns == std::vector<std::string>{"a", "b", "c"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.cell(0, "b") == "x");
  CHECK(t.cell(1, "c") == "-1");
  CHECK(t.cell(1, "b") == "");
  CHECK_THROWS_AS(t.column("zz"), std::out_of_range);
  CHECK_THROWS_AS(read_csv(tmp.str() + "/missing.csv"), std::runtime_error);
}

TEST_CASE("order statistics behave at the edges") {
  CHECK(median_of({3.0}) == 3.0);
  CHECK(median_of({1.0, 9.0, 5.0}) == 5.0);
  CHECK(median_of({4.0, 1.0, 3.0, 2.0}) == doctest::Approx(2.5));
  CHECK_THROWS_AS(median_of({}), std::invalid_argument);

  std::vector<double> v{10.0, 0.0, 5.0};
  CHECK(quantile_of(v, 0.0) == 0.0);
  CHECK(quantile_of(v, 1.0) == 10.0);
  CHECK(quantile_of(v, 0.5) == 5.0);
  CHECK(quantile_of({1.0, 2.0}, 0.25) == doctest::Approx(1.25));

  BoxStats b = box_stats("demo", {5.0, 1.0, 3.0, 2.0, 4.0});
  CHECK(b.label == "demo");
  CHECK(b.lo == 1.0);
  CHECK(b.med == 3.0);
  CHECK(b.hi == 5.0);
  CHECK(b.lo <= b.q1);
  CHECK(b.q1 <= b.med);
  CHECK(b.med <= b.q3);
  CHECK(b.q3 <= b.hi);
}

TEST_CASE("pareto marking matches a brute-force scan") {
  Rng rng(555);
  std::vector<ParetoPoint> pts;
  for (int i = 0; i < 60; ++i) {
    ParetoPoint p;
    p.label = "p" + std::to_string(i);
    p.disparity = rng.uniform();
    p.mean_reward = rng.uniform();
    pts.push_back(p);
  }
  std::vector<ParetoPoint> marked = pts;
  mark_nondominated(marked);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (i == j) continue;
      bool no_worse = pts[j].disparity <= pts[i].disparity &&
                      pts[j].mean_reward >= pts[i].mean_reward;
      bool better = pts[j].disparity < pts[i].disparity ||
                    pts[j].mean_reward > pts[i].mean_reward;
      if (no_worse && better) {
        dominated = true;
        break;
      }
    }
    CHECK(marked[i].nondominated == !dominated);
  }

  SUBCASE("a single point is trivially nondominated") {
    std::vector<ParetoPoint> one(1);
    mark_nondominated(one);
    CHECK(one[0].nondominated);
  }
}

TEST_CASE("svg renders are deterministic") {
  SvgSeries s;
  s.label = "run";
  s.x = {0.0, 1.0, 2.0};
  s.y = {0.5, 0.25, 0.75};
  std::string a = svg_line_chart({s}, "title", "episode", "value");
  std::string b = svg_line_chart({s}, "title", "episode", "value");
  CHECK(a == b);
  CHECK(a.find("<svg") != std::string::npos);

  BoxStats box = box_stats("cfg", {1.0, 2.0, 3.0});
  CHECK(svg_boxplot({box}, "t", "y") == svg_boxplot({box}, "t", "y"));

  ParetoPoint p;
  p.label = "x";
  p.disparity = 0.3;
  p.mean_reward = 1.2;
  p.nondominated = true;
  CHECK(svg_pareto({p}, "t", "x", "y") == svg_pareto({p}, "t", "x", "y"));
}

TEST_CASE("run directories derive from config identity") {
  ExperimentConfig cfg = desk_ah_config();
  cfg.output_dir = "out";
  std::string hash = config_hash(cfg);
  CHECK(run_dir(cfg) == "out/" + hash);
  CHECK(seed_dir(cfg, 9) == "out/" + hash + "/seed9");

  CHECK(run_label(cfg).rfind("fairppo", 0) == 0);
  ExperimentConfig ppo = cfg;
  ppo.algorithm = Algorithm::Ppo;
  normalize_config(ppo);
  CHECK(run_label(ppo) == "ppo");
  ExperimentConfig fen = cfg;
  fen.algorithm = Algorithm::Fen;
  CHECK(run_label(fen) == "fen");
  ExperimentConfig soto = cfg;
  soto.algorithm = Algorithm::Soto;
  CHECK(run_label(soto).rfind("soto", 0) == 0);
}

TEST_CASE("the metric table schema is stable") {
  std::vector<std::string> cols = metric_csv_columns();
  CHECK(cols.size() == 20);
  CHECK(cols.front() == "phase");
  CHECK(std::find(cols.begin(), cols.end(), "disparity") != cols.end());
  CHECK(std::find(cols.begin(), cols.end(), "pct_perfect") != cols.end());
  CHECK(std::find(cols.begin(), cols.end(), "swing_moves") != cols.end());
}

TEST_CASE("training writes rows, metrics, and checkpoints") {
  TempDir tmp("train_ah");
  ExperimentConfig cfg = tiny_ah(tmp.str());
  RunRecord rec = train(cfg, 1);
  CHECK(rec.seed == 1);
  CHECK(rec.config_hash == config_hash(cfg));
  REQUIRE(static_cast<int>(rec.rows.size()) == cfg.train_episodes);
  for (const EpisodeRow& r : rec.rows) {
    CHECK(r.phase == "train");
    CHECK(std::isfinite(r.objective));
    CHECK(std::isfinite(r.mean_reward));
    CHECK(r.lambda >= 0.0);
  }
  CHECK(rec.wall_clock_sec > 0.0);

  CsvTable t = read_csv(rec.metrics_csv_path);
  CHECK(t.columns == metric_csv_columns());
  CHECK(static_cast<int>(t.rows.size()) == cfg.train_episodes);

  REQUIRE(!rec.checkpoint_paths.empty());
  for (const std::string& p : rec.checkpoint_paths) {
    INFO("checkpoint ", p);
    CHECK(fs::exists(p));
  }
  CHECK(fs::exists(run_dir(cfg) + "/config.json"));
}

TEST_CASE("evaluation is deterministic and reproducible") {
  TempDir tmp("eval_ah");
  ExperimentConfig cfg = tiny_ah(tmp.str());
  train(cfg, 1);

  RunRecord e1 = evaluate(cfg, 1);
  REQUIRE(static_cast<int>(e1.rows.size()) == cfg.eval_episodes);
  CHECK(e1.rows[0].phase == "eval");
  std::string metrics_a = slurp(e1.metrics_csv_path);
  std::string report_a = slurp(seed_dir(cfg, 1) + "/report.csv");

  RunRecord e2 = evaluate(cfg, 1);
  CHECK(slurp(e2.metrics_csv_path) == metrics_a);
  CHECK(slurp(seed_dir(cfg, 1) + "/report.csv") == report_a);
  CHECK(e1.final_report.csv_row() == e2.final_report.csv_row());
}

TEST_CASE("hospital runs fill the service metrics") {
  TempDir tmp("train_hs");
  ExperimentConfig cfg = tiny_hs(tmp.str());
  RunRecord tr = train(cfg, 1);
  REQUIRE(static_cast<int>(tr.rows.size()) == cfg.train_episodes);

  RunRecord ev = evaluate(cfg, 1);
  REQUIRE(!ev.rows.empty());
  for (const EpisodeRow& r : ev.rows) {
    REQUIRE(r.hs.has_value());
    CHECK(r.hs->arrivals == cfg.hs.patients_per_day);
  }
  CsvTable t = read_csv(ev.metrics_csv_path);
  CHECK(t.cell(0, "arrivals") == std::to_string(cfg.hs.patients_per_day));
  CHECK(!t.cell(0, "treated").empty());
}

TEST_CASE("baseline traces record which head was active") {
  TempDir tmp("trace");
  SUBCASE("hierarchical controller") {
    ExperimentConfig cfg = tiny_ah(tmp.str() + "/fen");
    cfg.algorithm = Algorithm::Fen;
    normalize_config(cfg);
    RunRecord rec = train(cfg, 1);
    REQUIRE(!rec.trace.empty());
    for (const PolicyTraceRow& row : rec.trace) {
      CHECK(row.eval_phase == 0);
      CHECK(row.head >= 0);
      CHECK(row.head < cfg.fen.k_sub);
    }
  }
  SUBCASE("two-headed policy") {
    ExperimentConfig cfg = tiny_ah(tmp.str() + "/soto");
    cfg.algorithm = Algorithm::Soto;
    normalize_config(cfg);
    RunRecord rec = train(cfg, 1);
    REQUIRE(!rec.trace.empty());
    for (const PolicyTraceRow& row : rec.trace) {
      CHECK((row.head == 0 || row.head == 1));
    }
  }
  SUBCASE("flat learners leave no trace") {
    ExperimentConfig cfg = tiny_ah(tmp.str() + "/flat");
    RunRecord rec = train(cfg, 1);
    CHECK(rec.trace.empty());
  }
}

TEST_CASE("sweeps cover the grid and fill price of fairness") {
  TempDir tmp("sweep");
  ExperimentConfig base = tiny_ah(tmp.str());
  base.train_episodes = 1;
  SweepGrid grid;
  grid.alphas = {0.0, 0.5};
  grid.betas = {0.0, 0.5};

  SweepGrid defaults;
  CHECK(defaults.alphas.size() * defaults.betas.size() == 25);

  SweepResult res = sweep(base, grid);
  CHECK(res.failures.empty());
  REQUIRE(static_cast<int>(res.runs.size()) == 4 * 2);

  std::map<std::uint64_t, double> baseline_mean;
  for (const RunRecord& r : res.runs) {
    if (r.config.penalty.alpha == 0.0 && r.config.penalty.beta == 0.0) {
      baseline_mean[r.seed] = r.final_report.mean_reward;
    }
  }
  REQUIRE(static_cast<int>(baseline_mean.size()) == 2);
  for (const RunRecord& r : res.runs) {
    double base_reward = baseline_mean.at(r.seed);
    if (base_reward == 0.0) continue;
    REQUIRE(r.final_report.price_of_fairness.has_value());
    CHECK(*r.final_report.price_of_fairness ==
          doctest::Approx(price_of_fairness(r.final_report.mean_reward, base_reward))
              .epsilon(1e-12));
    if (r.config.penalty.alpha == 0.0 && r.config.penalty.beta == 0.0) {
      CHECK(*r.final_report.price_of_fairness == doctest::Approx(0.0));
    }
  }

  CsvTable summary = read_csv(res.summary_csv_path);
  CHECK(static_cast<int>(summary.rows.size()) == 8);
  CHECK(summary.columns.front() == "config_hash");

  CsvTable medians = read_csv(res.medians_csv_path);
  REQUIRE(static_cast<int>(medians.rows.size()) == 4);
  double prev = -1.0;
  for (std::size_t i = 0; i < medians.rows.size(); ++i) {
    double med = std::stod(medians.cell(i, "median_dp"));
    CHECK(med >= prev);
    prev = med;
    CHECK(medians.cell(i, "seed_count") == "2");
  }
  CHECK(res.best_config_hash == medians.cell(0, "config_hash"));

  SUBCASE("plot export is deterministic") {
    std::vector<std::string> p1 = export_plots(res.runs, tmp.str() + "/plots1");
    std::vector<std::string> p2 = export_plots(res.runs, tmp.str() + "/plots2");
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
      CHECK(slurp(p1[i]) == slurp(p2[i]));
    }
    CHECK_THROWS_AS(export_plots({}, tmp.str() + "/plots3"), std::invalid_argument);
  }
}

TEST_CASE("a divergent run aborts with a dump") {
  TempDir tmp("abort");
  ExperimentConfig cfg = tiny_ah(tmp.str());
  cfg.train_episodes = 4;
  cfg.penalty.alpha = 0.5;
  cfg.penalty.beta = 0.5;
  cfg.ppo.learning_rate = 1e300;
  normalize_config(cfg);
  CHECK_THROWS_AS(train(cfg, 1), std::runtime_error);
  CHECK(fs::exists(seed_dir(cfg, 1) + "/abort_dump.json"));
}
