#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/errors.hpp"
#include "fedsim/model.hpp"
#include "fedsim/overheads.hpp"
#include "fedsim/population.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

// The tunable pair: participants per round (M) and training passes (E).
// Passes may be fractional in fixed-hyper-parameter runs; the tuner only
// ever emits integers >= 1.
struct HyperParams {
  int participants = 1;
  double passes = 1.0;
};

enum class AggregatorKind { fedavg, fednova, fedadagrad };

inline AggregatorKind aggregator_kind_from_string(const std::string& s) {
  if (s == "fedavg") return AggregatorKind::fedavg;
  if (s == "fednova") return AggregatorKind::fednova;
  if (s == "fedadagrad") return AggregatorKind::fedadagrad;
  throw ConfigError("unknown aggregator kind: " + s);
}

inline std::string to_string(AggregatorKind k) {
  switch (k) {
    case AggregatorKind::fedavg: return "fedavg";
    case AggregatorKind::fednova: return "fednova";
    default: return "fedadagrad";
  }
}

struct AggregatorState {
  AggregatorKind kind = AggregatorKind::fedavg;
  // fedadagrad server state; empty for the other kinds.
  std::vector<double> accumulator;
  std::vector<double> momentum;
  double server_lr = 0.1;
  double beta1 = 0.0;
  double tau = 1e-3;

  static AggregatorState make(AggregatorKind kind, long long num_params,
                              double server_lr = 0.1, double beta1 = 0.0,
                              double tau = 1e-3) {
    AggregatorState s;
    s.kind = kind;
    s.server_lr = server_lr;
    s.beta1 = beta1;
    s.tau = tau;
    if (!(tau > 0)) throw ConfigError("aggregator.tau must be > 0");
    if (kind == AggregatorKind::fedadagrad) {
      s.accumulator.assign(num_params, 0.0);
      s.momentum.assign(num_params, 0.0);
    }
    return s;
  }
};

// Per-round log entry.
struct RoundRecord {
  int round = 0;
  HyperParams hyper;
  std::vector<int> participant_ids;  // sorted, |ids| == M
  long long max_nk = 0;
  long long sum_nk = 0;
  double accuracy_after = 0;
  Overheads round_overheads;
};

// Uniform M-subset of client ids without replacement, deterministic in
// (seed, round). Returned sorted ascending.
inline std::vector<int> select_participants(int round, int m,
                                            const ClientPopulation& population,
                                            std::uint64_t seed) {
  int k = population.num_clients();
  if (m < 1) throw ConfigError("participants per round must be >= 1");
  if (m > k)
    throw ConfigError("participants per round (" + std::to_string(m) +
                      ") exceeds client count (" + std::to_string(k) + ")");
  std::vector<int> ids(k);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(subseed(seed, stream::selection, static_cast<std::uint64_t>(round)));
  for (int i = 0; i < m; ++i) {
    std::uniform_int_distribution<int> pick(i, k - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(m);
  std::sort(ids.begin(), ids.end());
  return ids;
}

using WeightedReport = std::pair<LocalTrainReport, long long>;  // report, n_k

namespace detail {

inline void check_reports(const std::vector<WeightedReport>& reports,
                          std::size_t param_len) {
  if (reports.empty()) throw AggregationFault("no participant reports to aggregate");
  for (const auto& [rep, nk] : reports) {
    if (rep.params.size() != param_len)
      throw AggregationFault("parameter-vector length mismatch in aggregation");
    if (nk < 1) throw AggregationFault("participant with no data points");
  }
}

inline double total_weight(const std::vector<WeightedReport>& reports) {
  double sum = 0;
  for (const auto& [rep, nk] : reports) sum += static_cast<double>(nk);
  return sum;
}

}  // namespace detail

// Data-weighted parameter average over the selected participants.
inline ModelParams aggregate_fedavg(const ModelParams& global,
                                    const std::vector<WeightedReport>& reports) {
  detail::check_reports(reports, global.w.size());
  double n = detail::total_weight(reports);
  ModelParams out = global;
  std::fill(out.w.begin(), out.w.end(), 0.0);
  for (const auto& [rep, nk] : reports) {
    double p = static_cast<double>(nk) / n;
    for (std::size_t i = 0; i < out.w.size(); ++i) out.w[i] += p * rep.params[i];
  }
  return out;
}

// Normalized averaging: each client delta is normalized by its local step
// count, then the data-weighted mean of normalized deltas is scaled back by
// the weighted mean step count. Reduces to fedavg when all step counts match.
inline ModelParams aggregate_fednova(const ModelParams& global,
                                     const std::vector<WeightedReport>& reports) {
  detail::check_reports(reports, global.w.size());
  for (const auto& [rep, nk] : reports)
    if (rep.num_updates < 1)
      throw AggregationFault("fednova participant with zero local updates");
  double n = detail::total_weight(reports);
  double mean_steps = 0;
  for (const auto& [rep, nk] : reports)
    mean_steps += static_cast<double>(nk) / n * static_cast<double>(rep.num_updates);
  ModelParams out = global;
  std::vector<double> norm_delta(global.w.size(), 0.0);
  for (const auto& [rep, nk] : reports) {
    double p = static_cast<double>(nk) / n;
    double inv_u = 1.0 / static_cast<double>(rep.num_updates);
    for (std::size_t i = 0; i < norm_delta.size(); ++i)
      norm_delta[i] += p * (rep.params[i] - global.w[i]) * inv_u;
  }
  for (std::size_t i = 0; i < out.w.size(); ++i)
    out.w[i] = global.w[i] + mean_steps * norm_delta[i];
  return out;
}

// Server-side adaptive update on the data-weighted mean pseudo-gradient.
inline std::pair<ModelParams, AggregatorState> aggregate_fedadagrad(
    const AggregatorState& state, const ModelParams& global,
    const std::vector<WeightedReport>& reports) {
  if (state.kind != AggregatorKind::fedadagrad)
    throw AggregationFault("aggregate_fedadagrad called with wrong state kind");
  detail::check_reports(reports, global.w.size());
  double n = detail::total_weight(reports);
  std::vector<double> g(global.w.size(), 0.0);
  for (const auto& [rep, nk] : reports) {
    double p = static_cast<double>(nk) / n;
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] += p * (rep.params[i] - global.w[i]);
  }
  AggregatorState next = state;
  ModelParams out = global;
  for (std::size_t i = 0; i < g.size(); ++i) {
    next.momentum[i] = state.beta1 * state.momentum[i] + (1.0 - state.beta1) * g[i];
    next.accumulator[i] = state.accumulator[i] + g[i] * g[i];
    out.w[i] = global.w[i] +
               state.server_lr * next.momentum[i] /
                   (std::sqrt(next.accumulator[i]) + state.tau);
  }
  return {std::move(out), std::move(next)};
}

struct LocalTrainOptions {
  int batch_size = 10;
  double lr = 0.01;
  double momentum = 0.9;
};

struct RoundOutcome {
  ModelParams params;
  AggregatorState aggregator;
  RoundRecord record;
  std::vector<long long> selected_nk;  // aligned with record.participant_ids
};

// One synchronous round: select, fan out local training from the current
// global, aggregate, evaluate. Overhead fields of the record are left zero;
// the experiment driver prices the round via the cost module.
inline RoundOutcome run_round(int round, const ModelParams& global,
                              const HyperParams& hyper,
                              const ClientPopulation& train_population,
                              const ClientPopulation& test_population,
                              const AggregatorState& aggregator,
                              const LocalTrainOptions& opts, std::uint64_t seed) {
  if (!(hyper.passes > 0)) throw ConfigError("hyper.passes must be > 0");
  RoundOutcome out;
  out.record.round = round;
  out.record.hyper = hyper;
  out.record.participant_ids =
      select_participants(round, hyper.participants, train_population, seed);

  std::vector<WeightedReport> reports;
  reports.reserve(out.record.participant_ids.size());
  try {
    for (int id : out.record.participant_ids) {
      const ClientDataset& data = train_population.clients[id];
      std::uint64_t client_seed =
          subseed(seed, static_cast<std::uint64_t>(round),
                  static_cast<std::uint64_t>(id));
      reports.emplace_back(local_train(global, data, hyper.passes, opts.batch_size,
                                       opts.lr, opts.momentum, client_seed),
                           data.size());
      out.selected_nk.push_back(data.size());
    }

    switch (aggregator.kind) {
      case AggregatorKind::fedavg:
        out.params = aggregate_fedavg(global, reports);
        out.aggregator = aggregator;
        break;
      case AggregatorKind::fednova:
        out.params = aggregate_fednova(global, reports);
        out.aggregator = aggregator;
        break;
      case AggregatorKind::fedadagrad: {
        auto [params, state] = aggregate_fedadagrad(aggregator, global, reports);
        out.params = std::move(params);
        out.aggregator = std::move(state);
        break;
      }
    }
  } catch (const TrainingFault& e) {
    throw TrainingFault("round " + std::to_string(round) + ": " + e.what());
  } catch (const AggregationFault& e) {
    throw AggregationFault("round " + std::to_string(round) + ": " + e.what());
  }

  out.record.max_nk =
      *std::max_element(out.selected_nk.begin(), out.selected_nk.end());
  out.record.sum_nk =
      std::accumulate(out.selected_nk.begin(), out.selected_nk.end(), 0LL);
  out.record.accuracy_after = evaluate(out.params, test_population);
  return out;
}

}  // namespace fedsim
