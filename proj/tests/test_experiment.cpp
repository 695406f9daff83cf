#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedsim/fedsim.hpp"

using namespace fedsim;
namespace fs = std::filesystem;

namespace {

// Frozen from one seeded run (see the golden test below).
constexpr double kGoldenFiftyRoundAccuracy = 0.7647058823529411;

// Small, fast task shared by the experiment-level tests.
ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.population.seed = 7;
  cfg.population.num_clients = 24;
  cfg.population.min_points = 3;
  cfg.population.max_points = 24;
  cfg.population.count_shape = 1.2;
  cfg.population.label_concentration = 1.0;
  cfg.population.feature_dim = 6;
  cfg.population.num_classes = 4;
  cfg.population.class_separation = 3.0;
  cfg.test_fraction = 0.25;
  cfg.split_seed = 2;
  cfg.arch = Arch::mlp;
  cfg.dims = {6, 8, 4};
  cfg.local = {5, 0.05, 0.9};
  cfg.aggregator = AggregatorKind::fedavg;
  cfg.cost = CostConstants{10, 7, 10, 7};
  cfg.target_accuracy = 0.8;
  cfg.round_cap = 60;
  cfg.mode = RunMode::fixed;
  cfg.initial = {4, 2.0};
  cfg.preference = {0.25, 0.25, 0.25, 0.25};
  cfg.seeds = {1};
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& tag) {
  fs::path d = fs::temp_directory_path() / ("fedsim_test_" + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("config parsing applies defaults and validates") {
  nlohmann::json j = nlohmann::json::parse(R"({
    "population": {"seed": 3, "clients": 10, "min_points": 2, "max_points": 8,
                   "count_shape": 1.1, "label_concentration": 0.5,
                   "feature_dim": 4, "classes": 3, "class_separation": 2.5},
    "model": {"arch": "mlp", "hidden": 12},
    "cost": {"preset": "resnet10"},
    "mode": "fedtune",
    "initial": {"participants": 2, "passes": 3},
    "tuner": {"preference": [0, 0, 1, 0]},
    "seeds": [4, 5]
  })");
  ExperimentConfig cfg = config_from_json(j);
  REQUIRE(cfg.dims.input == 4);
  REQUIRE(cfg.dims.classes == 3);
  REQUIRE(cfg.dims.hidden == 12);
  REQUIRE(cfg.cost.c1 == 12.5e6);
  REQUIRE(cfg.cost.c2 == 79.7e3);
  REQUIRE(cfg.mode == RunMode::fedtune);
  REQUIRE(cfg.preference.comp_load == 1.0);
  REQUIRE(cfg.seeds == std::vector<std::uint64_t>{4, 5});

  SECTION("bad aggregator kind is named") {
    j["aggregator"] = {{"kind", "fedsgd"}};
    REQUIRE_THROWS_AS(config_from_json(j), ConfigError);
  }
  SECTION("fractional passes rejected in fedtune mode") {
    j["initial"] = {{"participants", 2}, {"passes", 2.5}};
    REQUIRE_THROWS_AS(config_from_json(j), ConfigError);
  }
  SECTION("fractional passes accepted in fixed mode") {
    j["mode"] = "fixed";
    j["initial"] = {{"participants", 2}, {"passes", 0.5}};
    REQUIRE_NOTHROW(config_from_json(j));
  }
  SECTION("preference must sum to one") {
    j["tuner"] = {{"preference", {0.3, 0.3, 0.3, 0.0}}};
    REQUIRE_THROWS_AS(config_from_json(j), ConfigError);
  }
}

TEST_CASE("vacuous target stops after round one") {
  ExperimentConfig cfg = small_config();
  cfg.target_accuracy = 0.0;
  Trace t = run_experiment(cfg, 1);
  REQUIRE(t.rounds_used == 1);
  REQUIRE(t.reached_target);
}

TEST_CASE("fixed mode keeps hyper-parameters constant and never tunes") {
  ExperimentConfig cfg = small_config();
  Trace t = run_experiment(cfg, 1);
  REQUIRE(t.decisions.empty());
  for (const auto& r : t.rounds) {
    REQUIRE(r.hyper.participants == 4);
    REQUIRE(r.hyper.passes == 2.0);
  }
}

TEST_CASE("fractional passes run in fixed mode") {
  ExperimentConfig cfg = small_config();
  cfg.initial = {4, 0.5};
  cfg.round_cap = 5;
  cfg.target_accuracy = 1.0;
  Trace t = run_experiment(cfg, 1);
  REQUIRE(t.rounds_used == 5);
  for (const auto& r : t.rounds) REQUIRE(r.hyper.passes == 0.5);
}

TEST_CASE("ledger always equals a re-summation of the round records") {
  ExperimentConfig cfg = small_config();
  for (auto mode : {RunMode::fixed, RunMode::fedtune}) {
    cfg.mode = mode;
    Trace t = run_experiment(cfg, 3);
    Overheads sum;
    for (const auto& r : t.rounds) sum += r.round_overheads;
    REQUIRE(sum.comp_time == t.ledger.total.comp_time);
    REQUIRE(sum.trans_time == t.ledger.total.trans_time);
    REQUIRE(sum.comp_load == t.ledger.total.comp_load);
    REQUIRE(sum.trans_load == t.ledger.total.trans_load);
    REQUIRE(t.ledger.rounds == t.rounds_used);
  }
}

TEST_CASE("cost homogeneity: scaling constants scales totals") {
  ExperimentConfig cfg = small_config();
  Trace base = run_experiment(cfg, 2);
  const double lambda = 3.5;
  cfg.cost = CostConstants{cfg.cost.c1 * lambda, cfg.cost.c2 * lambda,
                           cfg.cost.c3 * lambda, cfg.cost.c4 * lambda};
  Trace scaled = run_experiment(cfg, 2);
  REQUIRE(scaled.rounds_used == base.rounds_used);
  REQUIRE(scaled.ledger.total.comp_time ==
          Catch::Approx(lambda * base.ledger.total.comp_time).epsilon(1e-12));
  REQUIRE(scaled.ledger.total.trans_time ==
          Catch::Approx(lambda * base.ledger.total.trans_time).epsilon(1e-12));
  REQUIRE(scaled.ledger.total.comp_load ==
          Catch::Approx(lambda * base.ledger.total.comp_load).epsilon(1e-12));
  REQUIRE(scaled.ledger.total.trans_load ==
          Catch::Approx(lambda * base.ledger.total.trans_load).epsilon(1e-12));
}

TEST_CASE("golden 50-round run accuracy") {
  ExperimentConfig cfg = small_config();
  cfg.target_accuracy = 1.0;  // run the full 50 rounds
  cfg.round_cap = 50;
  Trace t = run_experiment(cfg, 1);
  REQUIRE(t.rounds_used == 50);
  // Frozen from one seeded run (population seed 7, run seed 1, FedAvg).
  REQUIRE(t.final_accuracy == kGoldenFiftyRoundAccuracy);
}

TEST_CASE("export determinism and round-trip") {
  ExperimentConfig cfg = small_config();
  Trace t = run_experiment(cfg, 5);
  fs::path dir = temp_dir("export");

  export_trace(t, cfg, dir / "a.csv");
  export_trace(t, cfg, dir / "b.csv");
  REQUIRE(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  REQUIRE(slurp(dir / "a.json") == slurp(dir / "b.json"));

  Trace t2 = run_experiment(cfg, 5);
  export_trace(t2, cfg, dir / "c.csv");
  REQUIRE(slurp(dir / "a.csv") == slurp(dir / "c.csv"));
  REQUIRE(slurp(dir / "a.json") == slurp(dir / "c.json"));

  auto rows = load_trace_csv(dir / "a.csv");
  REQUIRE(rows.size() == t.rounds.size());
  Overheads sum;
  for (const auto& r : rows) sum += r.per_round;
  REQUIRE(sum.comp_time == t.ledger.total.comp_time);
  REQUIRE(sum.trans_time == t.ledger.total.trans_time);
  REQUIRE(sum.comp_load == t.ledger.total.comp_load);
  REQUIRE(sum.trans_load == t.ledger.total.trans_load);
  REQUIRE(rows.back().cumulative.comp_load == t.ledger.total.comp_load);

  TraceSummary s = load_trace_summary(dir / "a.json");
  REQUIRE(s.totals.comp_time == t.ledger.total.comp_time);
  REQUIRE(s.reached_target == t.reached_target);
  fs::remove_all(dir);
}

TEST_CASE("empty trace exports a header-only CSV and a valid JSON skeleton") {
  Trace t;
  ExperimentConfig cfg = small_config();
  fs::path dir = temp_dir("empty");
  export_trace(t, cfg, dir / "empty.csv");
  REQUIRE(slurp(dir / "empty.csv") == std::string(kTraceCsvHeader) + "\n");
  auto rows = load_trace_csv(dir / "empty.csv");
  REQUIRE(rows.empty());
  TraceSummary s = load_trace_summary(dir / "empty.json");
  REQUIRE(s.rounds_used == 0);
  fs::remove_all(dir);
}

TEST_CASE("golden ten-round trace matches the checked-in fixture") {
  ExperimentConfig cfg = small_config();
  cfg.target_accuracy = 1.0;
  cfg.round_cap = 10;
  Trace t = run_experiment(cfg, 9);
  std::string csv = trace_to_csv(t);
  fs::path fixture = fs::path(FEDSIM_TEST_DATA_DIR) / "golden_trace_10round.csv";
  REQUIRE(fs::exists(fixture));
  REQUIRE(csv == slurp(fixture));
}

TEST_CASE("compare_runs arithmetic") {
  auto trace_with = [](double comp_time, bool reached) {
    Trace t;
    t.ledger.total = {comp_time, 1, 1, 1};
    t.reached_target = reached;
    return t;
  };
  Preference a{1, 0, 0, 0};

  SECTION("identical runs give zero mean and zero std") {
    std::vector<Trace> base = {trace_with(100, true), trace_with(90, true)};
    ComparisonReport rep = compare_runs(base, base, a);
    REQUIRE(rep.mean_percent == 0.0);
    REQUIRE(rep.std_percent == 0.0);
    REQUIRE(rep.excluded == 0);
  }
  SECTION("known improvements give mean 20, population std sqrt(200/3)") {
    std::vector<Trace> base = {trace_with(100, true), trace_with(100, true),
                               trace_with(100, true)};
    std::vector<Trace> tuned = {trace_with(90, true), trace_with(80, true),
                                trace_with(70, true)};
    ComparisonReport rep = compare_runs(base, tuned, a);
    REQUIRE(rep.mean_percent == Catch::Approx(20.0).margin(1e-12));
    REQUIRE(rep.std_percent == Catch::Approx(std::sqrt(200.0 / 3.0)).margin(1e-9));
  }
  SECTION("unreached targets are excluded and counted") {
    std::vector<Trace> base = {trace_with(100, true), trace_with(100, false)};
    std::vector<Trace> tuned = {trace_with(80, true), trace_with(10, true)};
    ComparisonReport rep = compare_runs(base, tuned, a);
    REQUIRE(rep.excluded == 1);
    REQUIRE(rep.per_seed_percent.size() == 1);
    REQUIRE(rep.mean_percent == Catch::Approx(20.0).margin(1e-12));
  }
}

TEST_CASE("single-point sweep equals run_experiment") {
  ExperimentConfig cfg = small_config();
  SweepPoint pt;
  pt.fixed = cfg.initial;
  pt.label = "only";
  SweepResult r = sweep(cfg, {pt});
  REQUIRE(r.traces.size() == 1);
  Trace direct = run_experiment(cfg, cfg.seeds[0]);
  REQUIRE(r.traces[0].rounds_used == direct.rounds_used);
  REQUIRE(r.traces[0].ledger.total.comp_load == direct.ledger.total.comp_load);
  REQUIRE(r.rows[0].label == "only");
}

TEST_CASE("standard preference list has 15 valid entries") {
  auto prefs = standard_preferences();
  REQUIRE(prefs.size() == 15);
  for (const auto& p : prefs) REQUIRE_NOTHROW(p.validate());
}

TEST_CASE("nearly_monotone allows one small adjacent violation") {
  REQUIRE(nearly_monotone({10, 9, 8, 8}, true));
  REQUIRE(nearly_monotone({10, 9, 9.2, 8}, true));        // one +2.2% bump
  REQUIRE_FALSE(nearly_monotone({10, 9, 9.8, 8}, true));  // +8.9% bump
  REQUIRE_FALSE(nearly_monotone({10, 9.2, 9.4, 9.3, 9.45}, true));  // two bumps
  REQUIRE(nearly_monotone({1, 2, 3}, false));
  REQUIRE_FALSE(nearly_monotone({3, 2, 1}, false));
}

TEST_CASE("report is recomputable from exported sidecars alone") {
  ExperimentConfig cfg = small_config();
  cfg.seeds = {1, 2};
  cfg.target_accuracy = 0.6;
  std::vector<Trace> base = run_experiment_all_seeds(cfg);
  cfg.mode = RunMode::fedtune;
  cfg.preference = {0, 0, 1, 0};
  std::vector<Trace> tuned = run_experiment_all_seeds(cfg);

  fs::path dir = temp_dir("sidecar");
  std::vector<Trace> base2, tuned2;
  for (std::size_t i = 0; i < base.size(); ++i) {
    export_trace(base[i], cfg, dir / ("b" + std::to_string(i) + ".csv"));
    export_trace(tuned[i], cfg, dir / ("t" + std::to_string(i) + ".csv"));
    auto to_trace = [](const TraceSummary& s) {
      Trace t;
      t.ledger.total = s.totals;
      t.reached_target = s.reached_target;
      return t;
    };
    base2.push_back(to_trace(load_trace_summary(dir / ("b" + std::to_string(i) + ".json"))));
    tuned2.push_back(to_trace(load_trace_summary(dir / ("t" + std::to_string(i) + ".json"))));
  }
  ComparisonReport direct = compare_runs(base, tuned, cfg.preference);
  ComparisonReport loaded = compare_runs(base2, tuned2, cfg.preference);
  REQUIRE(direct.mean_percent == loaded.mean_percent);
  REQUIRE(direct.std_percent == loaded.std_percent);
  REQUIRE(direct.excluded == loaded.excluded);
  fs::remove_all(dir);
}
