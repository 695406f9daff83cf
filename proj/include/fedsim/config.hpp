#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "fedsim/cost.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/flcore.hpp"
#include "fedsim/model.hpp"
#include "fedsim/population.hpp"
#include "fedsim/tuner.hpp"

#include "json.hpp"

namespace fedsim {

enum class RunMode { fixed, fedtune };

inline RunMode run_mode_from_string(const std::string& s) {
  if (s == "fixed") return RunMode::fixed;
  if (s == "fedtune") return RunMode::fedtune;
  throw ConfigError("mode must be 'fixed' or 'fedtune', got '" + s + "'");
}

inline std::string to_string(RunMode m) {
  return m == RunMode::fixed ? "fixed" : "fedtune";
}

struct ExperimentConfig {
  PopulationSpec population;
  double test_fraction = 0.2;
  std::uint64_t split_seed = 1;

  Arch arch = Arch::mlp;
  ModelDims dims{16, 32, 10};
  LocalTrainOptions local;

  AggregatorKind aggregator = AggregatorKind::fedavg;
  double server_lr = 0.1;
  double beta1 = 0.0;
  double tau = 1e-3;

  std::string cost_preset;  // empty when explicit constants are given
  CostConstants cost;

  double target_accuracy = 0.7;
  int round_cap = 2000;
  RunMode mode = RunMode::fixed;
  HyperParams initial{20, 20.0};

  Preference preference{0.25, 0.25, 0.25, 0.25};
  double min_gain = 0.01;
  double penalty = 10.0;
  int max_passes = 50;

  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "out";

  void validate() const {
    population.validate();
    if (!(test_fraction > 0 && test_fraction < 1))
      throw ConfigError("split.test_fraction must lie in (0,1)");
    if (dims.input != population.feature_dim)
      throw ConfigError("model input dim must equal population.feature_dim");
    if (dims.classes != population.num_classes)
      throw ConfigError("model classes must equal population.num_classes");
    if (local.batch_size < 1) throw ConfigError("local.batch_size must be >= 1");
    if (!(local.lr > 0)) throw ConfigError("local.learning_rate must be > 0");
    if (!(local.momentum >= 0 && local.momentum < 1))
      throw ConfigError("local.momentum must lie in [0,1)");
    cost.validate();
    // 0 is allowed as a vacuously reached target; stops after round 1.
    if (!(target_accuracy >= 0 && target_accuracy <= 1))
      throw ConfigError("target_accuracy must lie in [0,1]");
    if (round_cap < 1) throw ConfigError("round_cap must be >= 1");
    if (initial.participants < 1)
      throw ConfigError("initial.participants must be >= 1");
    if (!(initial.passes > 0)) throw ConfigError("initial.passes must be > 0");
    if (mode == RunMode::fedtune) {
      preference.validate();
      if (!(min_gain > 0)) throw ConfigError("tuner.min_gain must be > 0");
      if (!(penalty >= 1)) throw ConfigError("tuner.penalty must be >= 1");
      if (max_passes < 1) throw ConfigError("tuner.max_passes must be >= 1");
      if (initial.passes != std::floor(initial.passes) ||
          initial.passes > max_passes)
        throw ConfigError(
            "initial.passes must be an integer within tuner bounds in fedtune mode");
    }
    if (seeds.empty()) throw ConfigError("seeds must be nonempty");
  }
};

namespace detail {

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
  if (auto it = j.find(key); it != j.end()) return it->get<T>();
  return fallback;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  using detail::get_or;

  if (auto it = j.find("population"); it != j.end()) {
    const auto& p = *it;
    cfg.population.seed = get_or<std::uint64_t>(p, "seed", cfg.population.seed);
    cfg.population.num_clients = get_or<int>(p, "clients", cfg.population.num_clients);
    cfg.population.min_points = get_or<int>(p, "min_points", cfg.population.min_points);
    cfg.population.max_points = get_or<int>(p, "max_points", cfg.population.max_points);
    cfg.population.count_shape =
        get_or<double>(p, "count_shape", cfg.population.count_shape);
    cfg.population.label_concentration =
        get_or<double>(p, "label_concentration", cfg.population.label_concentration);
    cfg.population.feature_dim =
        get_or<int>(p, "feature_dim", cfg.population.feature_dim);
    cfg.population.num_classes = get_or<int>(p, "classes", cfg.population.num_classes);
    cfg.population.class_separation =
        get_or<double>(p, "class_separation", cfg.population.class_separation);
  }
  if (auto it = j.find("split"); it != j.end()) {
    cfg.test_fraction = get_or<double>(*it, "test_fraction", cfg.test_fraction);
    cfg.split_seed = get_or<std::uint64_t>(*it, "seed", cfg.split_seed);
  }
  if (auto it = j.find("model"); it != j.end()) {
    std::string arch = get_or<std::string>(*it, "arch", "mlp");
    if (arch == "linear")
      cfg.arch = Arch::linear;
    else if (arch == "mlp")
      cfg.arch = Arch::mlp;
    else
      throw ConfigError("model.arch must be 'linear' or 'mlp', got '" + arch + "'");
    cfg.dims.hidden = get_or<int>(*it, "hidden", cfg.dims.hidden);
  }
  cfg.dims.input = cfg.population.feature_dim;
  cfg.dims.classes = cfg.population.num_classes;
  if (auto it = j.find("local"); it != j.end()) {
    cfg.local.batch_size = get_or<int>(*it, "batch_size", cfg.local.batch_size);
    cfg.local.lr = get_or<double>(*it, "learning_rate", cfg.local.lr);
    cfg.local.momentum = get_or<double>(*it, "momentum", cfg.local.momentum);
  }
  if (auto it = j.find("aggregator"); it != j.end()) {
    cfg.aggregator =
        aggregator_kind_from_string(get_or<std::string>(*it, "kind", "fedavg"));
    cfg.server_lr = get_or<double>(*it, "server_lr", cfg.server_lr);
    cfg.beta1 = get_or<double>(*it, "beta1", cfg.beta1);
    cfg.tau = get_or<double>(*it, "tau", cfg.tau);
  }
  if (auto it = j.find("cost"); it != j.end()) {
    if (auto pit = it->find("preset"); pit != it->end()) {
      cfg.cost_preset = pit->get<std::string>();
      cfg.cost = CostConstants::from_descriptor(descriptor_preset(cfg.cost_preset));
    } else {
      cfg.cost.c1 = it->at("c1").get<double>();
      cfg.cost.c2 = it->at("c2").get<double>();
      cfg.cost.c3 = it->at("c3").get<double>();
      cfg.cost.c4 = it->at("c4").get<double>();
    }
  } else {
    cfg.cost = CostConstants::from_descriptor(descriptor(cfg.arch, cfg.dims));
  }
  cfg.target_accuracy = get_or<double>(j, "target_accuracy", cfg.target_accuracy);
  cfg.round_cap = get_or<int>(j, "round_cap", cfg.round_cap);
  cfg.mode = run_mode_from_string(get_or<std::string>(j, "mode", "fixed"));
  if (auto it = j.find("initial"); it != j.end()) {
    cfg.initial.participants =
        get_or<int>(*it, "participants", cfg.initial.participants);
    cfg.initial.passes = get_or<double>(*it, "passes", cfg.initial.passes);
  }
  if (auto it = j.find("tuner"); it != j.end()) {
    if (auto pit = it->find("preference"); pit != it->end()) {
      auto v = pit->get<std::vector<double>>();
      if (v.size() != 4)
        throw ConfigError("tuner.preference must have exactly 4 weights");
      cfg.preference = {v[0], v[1], v[2], v[3]};
    }
    cfg.min_gain = get_or<double>(*it, "min_gain", cfg.min_gain);
    cfg.penalty = get_or<double>(*it, "penalty", cfg.penalty);
    cfg.max_passes = get_or<int>(*it, "max_passes", cfg.max_passes);
  }
  cfg.seeds = detail::get_or<std::vector<std::uint64_t>>(j, "seeds", cfg.seeds);
  cfg.output_dir = get_or<std::string>(j, "output_dir", cfg.output_dir);
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::ordered_json j;
  j["population"] = {{"seed", cfg.population.seed},
                     {"clients", cfg.population.num_clients},
                     {"min_points", cfg.population.min_points},
                     {"max_points", cfg.population.max_points},
                     {"count_shape", cfg.population.count_shape},
                     {"label_concentration", cfg.population.label_concentration},
                     {"feature_dim", cfg.population.feature_dim},
                     {"classes", cfg.population.num_classes},
                     {"class_separation", cfg.population.class_separation}};
  j["split"] = {{"test_fraction", cfg.test_fraction}, {"seed", cfg.split_seed}};
  j["model"] = {{"arch", cfg.arch == Arch::linear ? "linear" : "mlp"},
                {"hidden", cfg.dims.hidden}};
  j["local"] = {{"batch_size", cfg.local.batch_size},
                {"learning_rate", cfg.local.lr},
                {"momentum", cfg.local.momentum}};
  j["aggregator"] = {{"kind", to_string(cfg.aggregator)},
                     {"server_lr", cfg.server_lr},
                     {"beta1", cfg.beta1},
                     {"tau", cfg.tau}};
  if (!cfg.cost_preset.empty()) {
    j["cost"] = {{"preset", cfg.cost_preset}};
  } else {
    j["cost"] = {{"c1", cfg.cost.c1},
                 {"c2", cfg.cost.c2},
                 {"c3", cfg.cost.c3},
                 {"c4", cfg.cost.c4}};
  }
  j["target_accuracy"] = cfg.target_accuracy;
  j["round_cap"] = cfg.round_cap;
  j["mode"] = to_string(cfg.mode);
  j["initial"] = {{"participants", cfg.initial.participants},
                  {"passes", cfg.initial.passes}};
  j["tuner"] = {{"preference",
                 {cfg.preference.comp_time, cfg.preference.trans_time,
                  cfg.preference.comp_load, cfg.preference.trans_load}},
                {"min_gain", cfg.min_gain},
                {"penalty", cfg.penalty},
                {"max_passes", cfg.max_passes}};
  j["seeds"] = cfg.seeds;
  j["output_dir"] = cfg.output_dir;
  return j;
}

}  // namespace fedsim
