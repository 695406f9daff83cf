#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fedsim/config.hpp"
#include "fedsim/experiment.hpp"

#include "json.hpp"

namespace fedsim {

// Shortest round-trip decimal form; integral values print without exponent
// so the files stay byte-stable and diff-friendly.
inline std::string format_number(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf),
                                 static_cast<long long>(v));
    return std::string(buf, p);
  }
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

inline constexpr const char* kTraceCsvHeader =
    "round,M,E,accuracy,ct,tt,cl,tl,cum_t,cum_q,cum_z,cum_v,decision_flag,"
    "dM_sign,dE_sign,I_value";

namespace detail {

inline int sign_of(double x) { return x > 0 ? 1 : (x < 0 ? -1 : 0); }

}  // namespace detail

inline std::string trace_to_csv(const Trace& trace) {
  std::string out(kTraceCsvHeader);
  out += '\n';
  Overheads cum;
  std::size_t next_decision = 0;
  for (const auto& rec : trace.rounds) {
    cum += rec.round_overheads;
    bool decided = next_decision < trace.decisions.size() &&
                   trace.decisions[next_decision].round == rec.round;
    const TunerDecision* d = decided ? &trace.decisions[next_decision].decision : nullptr;
    if (decided) ++next_decision;
    out += std::to_string(rec.round);
    out += ',';
    out += std::to_string(rec.hyper.participants);
    out += ',';
    out += format_number(rec.hyper.passes);
    out += ',';
    out += format_number(rec.accuracy_after);
    out += ',';
    out += format_number(rec.round_overheads.comp_time);
    out += ',';
    out += format_number(rec.round_overheads.trans_time);
    out += ',';
    out += format_number(rec.round_overheads.comp_load);
    out += ',';
    out += format_number(rec.round_overheads.trans_load);
    out += ',';
    out += format_number(cum.comp_time);
    out += ',';
    out += format_number(cum.trans_time);
    out += ',';
    out += format_number(cum.comp_load);
    out += ',';
    out += format_number(cum.trans_load);
    out += ',';
    out += decided ? '1' : '0';
    out += ',';
    out += std::to_string(d ? detail::sign_of(d->delta_m) : 0);
    out += ',';
    out += std::to_string(d ? detail::sign_of(d->delta_e) : 0);
    out += ',';
    out += format_number(d ? d->comparison : 0.0);
    out += '\n';
  }
  return out;
}

inline nlohmann::ordered_json slopes_to_json(const SlopeSet& s) {
  return {{"comp_time", s.comp_time},
          {"trans_time", s.trans_time},
          {"comp_load", s.comp_load},
          {"trans_load", s.trans_load}};
}

inline nlohmann::ordered_json overheads_to_json(const Overheads& o) {
  return {{"comp_time", o.comp_time},
          {"trans_time", o.trans_time},
          {"comp_load", o.comp_load},
          {"trans_load", o.trans_load}};
}

inline nlohmann::ordered_json trace_sidecar_json(const Trace& trace,
                                                 const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["config"] = config_to_json(cfg);
  j["seed"] = trace.seed;
  j["mode"] = to_string(trace.mode);
  j["reached_target"] = trace.reached_target;
  j["rounds_used"] = trace.rounds_used;
  j["final_accuracy"] = trace.final_accuracy;
  j["final_hyper"] = {{"participants", trace.final_hyper.participants},
                      {"passes", trace.final_hyper.passes}};
  auto decisions = nlohmann::ordered_json::array();
  for (const auto& ev : trace.decisions) {
    decisions.push_back({{"round", ev.round},
                         {"delta_m", ev.decision.delta_m},
                         {"delta_e", ev.decision.delta_e},
                         {"comparison", ev.decision.comparison},
                         {"eta", slopes_to_json(ev.decision.eta)},
                         {"zeta", slopes_to_json(ev.decision.zeta)},
                         {"next", {{"participants", ev.decision.next.participants},
                                   {"passes", ev.decision.next.passes}}}});
  }
  j["decisions"] = std::move(decisions);
  j["ledger"] = {{"totals", overheads_to_json(trace.ledger.total)},
                 {"rounds", trace.ledger.rounds}};
  return j;
}

// Writes <path> (CSV) plus a sidecar JSON at the same stem. Byte-stable for
// a given trace.
inline void export_trace(const Trace& trace, const ExperimentConfig& cfg,
                         const std::filesystem::path& csv_path) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw IoError("cannot write trace CSV: " + csv_path.string());
  csv << trace_to_csv(trace);

  std::filesystem::path json_path = csv_path;
  json_path.replace_extension(".json");
  std::ofstream js(json_path, std::ios::binary);
  if (!js) throw IoError("cannot write trace JSON: " + json_path.string());
  js << trace_sidecar_json(trace, cfg).dump(2) << '\n';
}

// Per-round values parsed back from an exported CSV.
struct CsvRound {
  int round = 0;
  int participants = 0;
  double passes = 0;
  double accuracy = 0;
  Overheads per_round;
  Overheads cumulative;
  int decision_flag = 0;
};

inline std::vector<CsvRound> load_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open trace CSV: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty trace CSV: " + path.string());
  if (line != kTraceCsvHeader)
    throw IoError("unexpected trace CSV header in " + path.string());
  std::vector<CsvRound> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 16) throw IoError("malformed trace CSV row: " + line);
    CsvRound r;
    r.round = std::stoi(f[0]);
    r.participants = std::stoi(f[1]);
    r.passes = std::stod(f[2]);
    r.accuracy = std::stod(f[3]);
    r.per_round = {std::stod(f[4]), std::stod(f[5]), std::stod(f[6]), std::stod(f[7])};
    r.cumulative = {std::stod(f[8]), std::stod(f[9]), std::stod(f[10]), std::stod(f[11])};
    r.decision_flag = std::stoi(f[12]);
    rows.push_back(r);
  }
  return rows;
}

// Summary slice of a sidecar JSON, enough to recompute comparison reports.
struct TraceSummary {
  Overheads totals;
  bool reached_target = false;
  int rounds_used = 0;
  std::uint64_t seed = 0;
};

inline TraceSummary load_trace_summary(const std::filesystem::path& json_path) {
  std::ifstream in(json_path, std::ios::binary);
  if (!in) throw IoError("cannot open trace JSON: " + json_path.string());
  nlohmann::json j = nlohmann::json::parse(in);
  TraceSummary s;
  const auto& t = j.at("ledger").at("totals");
  s.totals = {t.at("comp_time").get<double>(), t.at("trans_time").get<double>(),
              t.at("comp_load").get<double>(), t.at("trans_load").get<double>()};
  s.reached_target = j.at("reached_target").get<bool>();
  s.rounds_used = j.at("rounds_used").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

}  // namespace fedsim
