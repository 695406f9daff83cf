// Federated-learning simulation harness with system-overhead accounting and
// an online (M, E) controller.
//
// Subcommands:
//   run     one experiment per seed, exporting trace CSV + sidecar JSON
//   sweep   grid of fixed (M, E) points or tuner preferences
//   compare baseline-vs-tuned report from exported sidecar JSONs
//   trends  median overhead directions across an M-sweep and an E-sweep
//
// FEDSIM_OUTPUT_DIR overrides the output directory from config/flags.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fedsim/fedsim.hpp"

#include "CLI11.hpp"

namespace fs = std::filesystem;
using namespace fedsim;

namespace {

std::vector<double> parse_number_list(const std::string& s, char sep = ',') {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, sep)) {
    if (cell.empty()) continue;
    out.push_back(std::stod(cell));
  }
  return out;
}

Preference parse_preference(const std::string& s) {
  auto v = parse_number_list(s);
  if (v.size() != 4)
    throw ConfigError("--pref expects four comma-separated weights, got '" + s + "'");
  Preference p{v[0], v[1], v[2], v[3]};
  p.validate();
  return p;
}

fs::path resolve_output_dir(const std::string& from_config,
                            const std::string& from_flag) {
  if (const char* env = std::getenv("FEDSIM_OUTPUT_DIR"); env && *env)
    return fs::path(env);
  if (!from_flag.empty()) return fs::path(from_flag);
  return fs::path(from_config);
}

std::string seed_tag(std::uint64_t seed) { return "seed" + std::to_string(seed); }

void print_trace_line(const std::string& name, const Trace& t) {
  std::cout << name << ": " << (t.reached_target ? "reached" : "capped")
            << " rounds=" << t.rounds_used
            << " accuracy=" << format_number(t.final_accuracy)
            << " final_M=" << t.final_hyper.participants
            << " final_E=" << format_number(t.final_hyper.passes)
            << " t=" << format_number(t.ledger.total.comp_time)
            << " q=" << format_number(t.ledger.total.trans_time)
            << " z=" << format_number(t.ledger.total.comp_load)
            << " v=" << format_number(t.ledger.total.trans_load) << '\n';
}

void write_sweep_summary(const SweepResult& result, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write sweep summary: " + path.string());
  out << "label,seed,reached,rounds,t,q,z,v,final_M,final_E\n";
  for (const auto& row : result.rows) {
    out << row.label << ',' << row.seed << ',' << (row.reached ? 1 : 0) << ','
        << row.rounds << ',' << format_number(row.totals.comp_time) << ','
        << format_number(row.totals.trans_time) << ','
        << format_number(row.totals.comp_load) << ','
        << format_number(row.totals.trans_load) << ','
        << row.final_hyper.participants << ','
        << format_number(row.final_hyper.passes) << '\n';
  }
}

int cmd_run(const std::string& config_path, const std::string& mode_override,
            std::optional<std::uint64_t> seed_override,
            std::optional<double> target_override, const std::string& pref_override,
            const std::string& out_override, const std::string& dump_population_path) {
  ExperimentConfig cfg = load_config(config_path);
  if (!mode_override.empty()) cfg.mode = run_mode_from_string(mode_override);
  if (seed_override) cfg.seeds = {*seed_override};
  if (target_override) cfg.target_accuracy = *target_override;
  if (!pref_override.empty()) cfg.preference = parse_preference(pref_override);
  cfg.validate();

  fs::path out_dir = resolve_output_dir(cfg.output_dir, out_override);
  fs::create_directories(out_dir);

  if (!dump_population_path.empty()) {
    ClientPopulation pop = generate_population(cfg.population);
    save_population(pop, cfg.population, dump_population_path);
    std::cout << "population dumped to " << dump_population_path << '\n';
  }

  for (std::uint64_t seed : cfg.seeds) {
    Trace t = run_experiment(cfg, seed);
    std::string name = "run_" + to_string(cfg.mode) + "_" + seed_tag(seed);
    export_trace(t, cfg, out_dir / (name + ".csv"));
    print_trace_line(name, t);
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& m_list,
              const std::string& e_list, const std::string& prefs,
              bool standard_prefs, const std::string& out_override) {
  ExperimentConfig cfg = load_config(config_path);
  fs::path out_dir = resolve_output_dir(cfg.output_dir, out_override);
  fs::create_directories(out_dir);

  std::vector<SweepPoint> grid;
  if (standard_prefs || !prefs.empty()) {
    if (standard_prefs) {
      // Table-style report: one fixed-baseline row ahead of the tuner rows.
      SweepPoint baseline;
      baseline.fixed = cfg.initial;
      baseline.label = "baseline";
      grid.push_back(baseline);
    }
    std::vector<Preference> list;
    if (standard_prefs) {
      list = standard_preferences();
    } else {
      std::stringstream ss(prefs);
      std::string one;
      while (std::getline(ss, one, ';'))
        if (!one.empty()) list.push_back(parse_preference(one));
    }
    int i = 0;
    for (const auto& p : list) {
      SweepPoint pt;
      pt.preference = p;
      pt.label = "pref" + std::to_string(i++);
      grid.push_back(pt);
    }
  } else {
    auto ms = parse_number_list(m_list);
    auto es = parse_number_list(e_list);
    if (ms.empty() || es.empty())
      throw ConfigError("sweep needs --m and --e lists, or --prefs/--standard-prefs");
    for (double m : ms)
      for (double e : es) {
        SweepPoint pt;
        pt.fixed = HyperParams{static_cast<int>(m), e};
        pt.label = "M" + format_number(m) + "_E" + format_number(e);
        grid.push_back(pt);
      }
  }

  SweepResult result = sweep(cfg, grid);
  std::size_t seeds_per_point = cfg.seeds.size();
  for (std::size_t i = 0; i < result.traces.size(); ++i) {
    const SweepRow& row = result.rows[i];
    const Trace& t = result.traces[i];
    const SweepPoint& point = grid[i / seeds_per_point];
    ExperimentConfig echo = cfg;
    if (point.fixed) {
      echo.mode = RunMode::fixed;
      echo.initial = *point.fixed;
    }
    if (point.preference) {
      echo.mode = RunMode::fedtune;
      echo.preference = *point.preference;
    }
    std::string name = "sweep_" + row.label + "_" + seed_tag(row.seed);
    export_trace(t, echo, out_dir / (name + ".csv"));
    print_trace_line(name, t);
  }
  write_sweep_summary(result, out_dir / "sweep_summary.csv");
  std::cout << "summary: " << (out_dir / "sweep_summary.csv").string() << '\n';
  return 0;
}

int cmd_compare(const std::vector<std::string>& baseline_paths,
                const std::vector<std::string>& tuned_paths,
                const std::string& pref_str) {
  Preference pref = parse_preference(pref_str);
  if (baseline_paths.size() != tuned_paths.size())
    throw ConfigError("--baseline and --tuned need the same number of files");
  std::vector<Trace> baseline, tuned;
  auto to_trace = [](const TraceSummary& s) {
    Trace t;
    t.seed = s.seed;
    t.ledger.total = s.totals;
    t.reached_target = s.reached_target;
    t.rounds_used = s.rounds_used;
    return t;
  };
  for (const auto& p : baseline_paths) baseline.push_back(to_trace(load_trace_summary(p)));
  for (const auto& p : tuned_paths) tuned.push_back(to_trace(load_trace_summary(p)));
  ComparisonReport rep = compare_runs(baseline, tuned, pref);
  std::cout << "pairs=" << rep.per_seed_percent.size()
            << " excluded=" << rep.excluded << '\n';
  for (double v : rep.per_seed_percent)
    std::cout << "  improvement " << format_number(v) << "%\n";
  std::cout << "mean=" << format_number(rep.mean_percent)
            << "% std=" << format_number(rep.std_percent) << "%\n";
  return 0;
}

int cmd_trends(const std::string& config_path, const std::string& m_list,
               double fixed_e, const std::string& e_list, int fixed_m,
               const std::string& out_override) {
  ExperimentConfig cfg = load_config(config_path);
  cfg.mode = RunMode::fixed;
  fs::path out_dir = resolve_output_dir(cfg.output_dir, out_override);
  fs::create_directories(out_dir);

  auto ms = parse_number_list(m_list);
  auto es = parse_number_list(e_list);
  if (ms.empty() || es.empty())
    throw ConfigError("trends needs --m and --e lists");

  auto medians_for = [&](const std::vector<SweepPoint>& grid) {
    SweepResult r = sweep(cfg, grid);
    std::vector<Overheads> med;
    std::size_t per_point = cfg.seeds.size();
    for (std::size_t g = 0; g < grid.size(); ++g) {
      std::vector<double> t, q, z, v;
      for (std::size_t s = 0; s < per_point; ++s) {
        const auto& row = r.rows[g * per_point + s];
        t.push_back(row.totals.comp_time);
        q.push_back(row.totals.trans_time);
        z.push_back(row.totals.comp_load);
        v.push_back(row.totals.trans_load);
      }
      med.push_back({median(t), median(q), median(z), median(v)});
    }
    return med;
  };

  std::vector<SweepPoint> m_grid, e_grid;
  for (double m : ms)
    m_grid.push_back({HyperParams{static_cast<int>(m), fixed_e}, std::nullopt,
                      "M" + format_number(m)});
  for (double e : es)
    e_grid.push_back({HyperParams{fixed_m, e}, std::nullopt, "E" + format_number(e)});

  auto m_med = medians_for(m_grid);
  auto e_med = medians_for(e_grid);

  auto column = [](const std::vector<Overheads>& rows, double Overheads::*f) {
    std::vector<double> xs;
    for (const auto& r : rows) xs.push_back(r.*f);
    return xs;
  };

  struct Check {
    const char* name;
    std::vector<double> xs;
    bool non_increasing;
  };
  std::vector<Check> checks = {
      {"TransT vs M non-increasing", column(m_med, &Overheads::trans_time), true},
      {"TransL vs M non-decreasing", column(m_med, &Overheads::trans_load), false},
      {"CompL vs M non-decreasing", column(m_med, &Overheads::comp_load), false},
      {"TransT vs E non-increasing", column(e_med, &Overheads::trans_time), true},
      {"CompT vs E non-decreasing", column(e_med, &Overheads::comp_time), false},
      {"CompL vs E non-decreasing", column(e_med, &Overheads::comp_load), false},
  };

  bool all_ok = true;
  for (const auto& c : checks) {
    bool ok = nearly_monotone(c.xs, c.non_increasing);
    all_ok = all_ok && ok;
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << c.name << " medians=";
    for (double x : c.xs) std::cout << ' ' << format_number(x);
    std::cout << '\n';
  }
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated-learning system-overhead simulator and tuner"};
  app.require_subcommand(1);

  std::string config_path, mode_override, pref_override, out_override;
  std::string dump_population_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<double> target_override;

  auto* run = app.add_subcommand("run", "run one experiment per configured seed");
  run->add_option("--config", config_path, "experiment config JSON")->required();
  run->add_option("--mode", mode_override, "override mode: fixed|fedtune");
  run->add_option("--seed", seed_override, "run a single seed");
  run->add_option("--target", target_override, "override target accuracy");
  run->add_option("--pref", pref_override, "override preference a,b,c,d");
  run->add_option("--out", out_override, "output directory");
  run->add_option("--dump-population", dump_population_path,
                  "also dump the generated population JSON here");

  std::string m_list, e_list, prefs;
  bool standard_prefs = false;
  auto* sw = app.add_subcommand("sweep", "grid sweep over (M,E) or preferences");
  sw->add_option("--config", config_path, "experiment config JSON")->required();
  sw->add_option("--m", m_list, "comma-separated participant counts");
  sw->add_option("--e", e_list, "comma-separated pass counts (fractions allowed)");
  sw->add_option("--prefs", prefs, "semicolon-separated preference quadruples");
  sw->add_flag("--standard-prefs", standard_prefs,
               "use the built-in 15 preference combinations");
  sw->add_option("--out", out_override, "output directory");

  std::vector<std::string> baseline_paths, tuned_paths;
  std::string cmp_pref;
  auto* cmp = app.add_subcommand("compare", "baseline-vs-tuned improvement report");
  cmp->add_option("--baseline", baseline_paths, "baseline sidecar JSONs")->required();
  cmp->add_option("--tuned", tuned_paths, "tuned sidecar JSONs")->required();
  cmp->add_option("--pref", cmp_pref, "preference a,b,c,d")->required();

  double fixed_e = 1.0;
  int fixed_m = 10;
  auto* tr = app.add_subcommand("trends", "overhead direction checks over M and E");
  tr->add_option("--config", config_path, "experiment config JSON")->required();
  tr->add_option("--m", m_list, "M values for the M-sweep")->required();
  tr->add_option("--fixed-e", fixed_e, "E used during the M-sweep");
  tr->add_option("--e", e_list, "E values for the E-sweep")->required();
  tr->add_option("--fixed-m", fixed_m, "M used during the E-sweep");
  tr->add_option("--out", out_override, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed())
      return cmd_run(config_path, mode_override, seed_override, target_override,
                     pref_override, out_override, dump_population_path);
    if (sw->parsed())
      return cmd_sweep(config_path, m_list, e_list, prefs, standard_prefs,
                       out_override);
    if (cmp->parsed()) return cmd_compare(baseline_paths, tuned_paths, cmp_pref);
    if (tr->parsed())
      return cmd_trends(config_path, m_list, fixed_e, e_list, fixed_m, out_override);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
