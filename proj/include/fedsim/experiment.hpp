#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/config.hpp"
#include "fedsim/cost.hpp"
#include "fedsim/flcore.hpp"
#include "fedsim/model.hpp"
#include "fedsim/population.hpp"
#include "fedsim/tuner.hpp"

namespace fedsim {

struct DecisionEvent {
  int round = 0;
  TunerDecision decision;
};

struct Trace {
  std::uint64_t seed = 0;
  RunMode mode = RunMode::fixed;
  std::vector<RoundRecord> rounds;
  std::vector<DecisionEvent> decisions;
  OverheadLedger ledger;
  bool reached_target = false;
  int rounds_used = 0;
  HyperParams final_hyper;
  double final_accuracy = 0;
};

// One full training run: loop rounds until the target accuracy or the round
// cap, accruing overheads each round and (in fedtune mode) stepping the
// controller after accrual. Deterministic per (config, seed).
inline Trace run_experiment(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();

  ClientPopulation pop = generate_population(cfg.population);
  auto [train, test] = split_train_test(pop, cfg.test_fraction, cfg.split_seed);
  if (cfg.initial.participants > train.num_clients())
    throw ConfigError("initial.participants exceeds training-client count");

  ModelParams params = init_model(subseed(seed, stream::model_init), cfg.arch, cfg.dims);
  AggregatorState agg = AggregatorState::make(cfg.aggregator, param_count(cfg.arch, cfg.dims),
                                              cfg.server_lr, cfg.beta1, cfg.tau);

  std::optional<FedTune> tuner;
  if (cfg.mode == RunMode::fedtune) {
    TunerOptions topts;
    topts.preference = cfg.preference;
    topts.min_gain = cfg.min_gain;
    topts.penalty = cfg.penalty;
    topts.min_participants = 1;
    topts.max_participants = train.num_clients();
    topts.min_passes = 1;
    topts.max_passes = cfg.max_passes;
    tuner.emplace(topts, cfg.initial);
  }

  Trace trace;
  trace.seed = seed;
  trace.mode = cfg.mode;
  HyperParams hyper = cfg.initial;

  for (int r = 1; r <= cfg.round_cap; ++r) {
    RoundOutcome out =
        run_round(r, params, hyper, train, test, agg, cfg.local, seed);
    params = std::move(out.params);
    agg = std::move(out.aggregator);

    out.record.round_overheads =
        price_round(cfg.cost, hyper.passes, out.selected_nk, hyper.participants);
    trace.ledger = accrue(trace.ledger, out.record);
    trace.rounds.push_back(out.record);
    trace.final_accuracy = out.record.accuracy_after;
    trace.final_hyper = hyper;

    if (out.record.accuracy_after >= cfg.target_accuracy) {
      trace.reached_target = true;
      break;
    }
    if (tuner) {
      auto decision =
          tuner->step(out.record.accuracy_after, out.record.round_overheads);
      if (decision) {
        trace.decisions.push_back({r, *decision});
        hyper = decision->next;
      }
    }
  }
  trace.rounds_used = static_cast<int>(trace.rounds.size());
  return trace;
}

inline std::vector<Trace> run_experiment_all_seeds(const ExperimentConfig& cfg) {
  std::vector<Trace> traces;
  traces.reserve(cfg.seeds.size());
  for (std::uint64_t s : cfg.seeds) traces.push_back(run_experiment(cfg, s));
  return traces;
}

struct ComparisonReport {
  std::vector<double> per_seed_percent;
  double mean_percent = 0;
  double std_percent = 0;  // population standard deviation
  int excluded = 0;        // seed pairs skipped because a side missed target
};

// Seed-paired baseline-vs-tuned comparison. Pairs where either side failed
// to reach the target are excluded and counted.
inline ComparisonReport compare_runs(const std::vector<Trace>& baseline,
                                     const std::vector<Trace>& tuned,
                                     const Preference& pref) {
  if (baseline.size() != tuned.size())
    throw ConfigError("compare_runs requires equally many baseline and tuned traces");
  ComparisonReport rep;
  for (std::size_t i = 0; i < baseline.size(); ++i) {
    if (!baseline[i].reached_target || !tuned[i].reached_target) {
      ++rep.excluded;
      continue;
    }
    rep.per_seed_percent.push_back(overall_improvement_percent(
        baseline[i].ledger.total, tuned[i].ledger.total, pref));
  }
  if (rep.per_seed_percent.empty()) return rep;
  double n = static_cast<double>(rep.per_seed_percent.size());
  for (double v : rep.per_seed_percent) rep.mean_percent += v;
  rep.mean_percent /= n;
  for (double v : rep.per_seed_percent)
    rep.std_percent += (v - rep.mean_percent) * (v - rep.mean_percent);
  rep.std_percent = std::sqrt(rep.std_percent / n);
  return rep;
}

// One grid point of a sweep: either fixed (M, E) or a tuner preference.
struct SweepPoint {
  std::optional<HyperParams> fixed;
  std::optional<Preference> preference;
  std::string label;
};

struct SweepRow {
  std::string label;
  std::uint64_t seed = 0;
  bool reached = false;
  int rounds = 0;
  Overheads totals;
  HyperParams final_hyper;
  std::string error;  // nonempty when the run faulted
};

struct SweepResult {
  std::vector<Trace> traces;  // grid-major, seed-minor; faulted runs are empty
  std::vector<SweepRow> rows;
};

// Individual run failures are recorded in their row; the sweep continues.
inline SweepResult sweep(const ExperimentConfig& base,
                         const std::vector<SweepPoint>& grid) {
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  SweepResult result;
  for (const auto& point : grid) {
    ExperimentConfig cfg = base;
    if (point.fixed) {
      cfg.mode = RunMode::fixed;
      cfg.initial = *point.fixed;
    }
    if (point.preference) {
      cfg.mode = RunMode::fedtune;
      cfg.preference = *point.preference;
    }
    for (std::uint64_t s : cfg.seeds) {
      SweepRow row;
      row.label = point.label;
      row.seed = s;
      Trace t;
      try {
        t = run_experiment(cfg, s);
        row.reached = t.reached_target;
        row.rounds = t.rounds_used;
        row.totals = t.ledger.total;
        row.final_hyper = t.final_hyper;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      result.rows.push_back(std::move(row));
      result.traces.push_back(std::move(t));
    }
  }
  return result;
}

// The 15 preference combinations exercised in the evaluation protocol:
// 4 single-aspect, 6 pairs, 4 triples, 1 uniform.
inline std::vector<Preference> standard_preferences() {
  const double h = 0.5;
  const double t = 1.0 / 3.0;
  const double q = 0.25;
  return {
      {1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1},
      {h, h, 0, 0}, {h, 0, h, 0}, {h, 0, 0, h},
      {0, h, h, 0}, {0, h, 0, h}, {0, 0, h, h},
      {t, t, t, 0}, {t, t, 0, t}, {t, 0, t, t}, {0, t, t, t},
      {q, q, q, q},
  };
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw ConfigError("median of empty set");
  std::sort(xs.begin(), xs.end());
  std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Monotonicity check over a sequence of medians. Allows at most one
// adjacent-pair violation, and only if its relative magnitude stays under
// the given tolerance.
inline bool nearly_monotone(const std::vector<double>& xs, bool non_increasing,
                            double rel_tolerance = 0.05) {
  int violations = 0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    double a = xs[i], b = xs[i + 1];
    bool ok = non_increasing ? b <= a : b >= a;
    if (ok) continue;
    double magnitude = std::abs(b - a) / std::max(std::abs(a), 1e-300);
    ++violations;
    if (violations > 1 || magnitude >= rel_tolerance) return false;
  }
  return true;
}

}  // namespace fedsim
