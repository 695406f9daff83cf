#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

#include "json.hpp"

namespace fedsim {

// One client's local labeled dataset. Features are stored row-major,
// point i occupying [i*dim, (i+1)*dim).
struct ClientDataset {
  int client_id = 0;
  int feature_dim = 0;
  std::vector<double> features;
  std::vector<int> labels;

  long long size() const { return static_cast<long long>(labels.size()); }
  const double* point(long long i) const { return features.data() + i * feature_dim; }
};

struct ClientPopulation {
  std::vector<ClientDataset> clients;
  int feature_dim = 0;
  int num_classes = 0;

  int num_clients() const { return static_cast<int>(clients.size()); }
  long long total_points() const {
    long long n = 0;
    for (const auto& c : clients) n += c.size();
    return n;
  }
};

// Knobs for the synthetic federated population: client counts follow a
// truncated discrete power law, per-client label mixtures come from a
// symmetric Dirichlet, and features are class-conditional Gaussians whose
// means sit on a sphere of radius class_separation.
struct PopulationSpec {
  std::uint64_t seed = 0;
  int num_clients = 1;
  int min_points = 1;
  int max_points = 1;
  double count_shape = 1.0;         // power-law exponent; 0 = uniform counts
  double label_concentration = 1.0; // Dirichlet alpha per class; large = IID
  int feature_dim = 2;
  int num_classes = 2;
  double class_separation = 1.0;

  void validate() const {
    if (num_clients < 1) throw ConfigError("population.num_clients must be >= 1");
    if (min_points < 1) throw ConfigError("population.min_points must be >= 1");
    if (max_points < min_points)
      throw ConfigError("population.max_points must be >= population.min_points");
    if (!(label_concentration > 0))
      throw ConfigError("population.label_concentration must be > 0");
    if (feature_dim < 1) throw ConfigError("population.feature_dim must be >= 1");
    if (num_classes < 2) throw ConfigError("population.num_classes must be >= 2");
    if (!(class_separation > 0))
      throw ConfigError("population.class_separation must be > 0");
    if (!(count_shape >= 0)) throw ConfigError("population.count_shape must be >= 0");
  }
};

namespace detail {

// Inverse-CDF sampler for P(n) proportional to n^-shape on [lo, hi].
class TruncatedPowerLaw {
 public:
  TruncatedPowerLaw(int lo, int hi, double shape) : lo_(lo) {
    cum_.reserve(hi - lo + 1);
    double acc = 0;
    for (int n = lo; n <= hi; ++n) {
      acc += std::pow(static_cast<double>(n), -shape);
      cum_.push_back(acc);
    }
  }

  int sample(Rng& rng) const {
    std::uniform_real_distribution<double> u(0.0, cum_.back());
    double x = u(rng);
    auto it = std::lower_bound(cum_.begin(), cum_.end(), x);
    return lo_ + static_cast<int>(it - cum_.begin());
  }

 private:
  int lo_;
  std::vector<double> cum_;
};

inline std::vector<double> dirichlet_mixture(Rng& rng, int classes, double alpha) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> w(classes);
  double sum = 0;
  for (auto& x : w) {
    x = gamma(rng);
    sum += x;
  }
  if (sum <= 0) {
    // All-zero draw is possible for tiny alpha; fall back to a single class.
    std::uniform_int_distribution<int> pick(0, classes - 1);
    std::fill(w.begin(), w.end(), 0.0);
    w[pick(rng)] = 1.0;
    return w;
  }
  for (auto& x : w) x /= sum;
  return w;
}

inline int sample_categorical(Rng& rng, const std::vector<double>& p) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double x = u(rng);
  double acc = 0;
  for (size_t c = 0; c < p.size(); ++c) {
    acc += p[c];
    if (x < acc) return static_cast<int>(c);
  }
  return static_cast<int>(p.size()) - 1;
}

}  // namespace detail

inline ClientPopulation generate_population(const PopulationSpec& spec) {
  spec.validate();

  ClientPopulation pop;
  pop.feature_dim = spec.feature_dim;
  pop.num_classes = spec.num_classes;
  pop.clients.resize(spec.num_clients);

  // Per-client point counts.
  Rng count_rng(subseed(spec.seed, stream::counts));
  detail::TruncatedPowerLaw law(spec.min_points, spec.max_points,
                                spec.count_shape);
  std::vector<int> counts(spec.num_clients);
  for (auto& n : counts) n = law.sample(count_rng);

  // Class means: unit directions scaled to the requested separation.
  Rng mean_rng(subseed(spec.seed, stream::class_means));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> means(static_cast<size_t>(spec.num_classes) * spec.feature_dim);
  for (int c = 0; c < spec.num_classes; ++c) {
    double norm2 = 0;
    for (int j = 0; j < spec.feature_dim; ++j) {
      double g = gauss(mean_rng);
      means[c * spec.feature_dim + j] = g;
      norm2 += g * g;
    }
    double scale = spec.class_separation / std::sqrt(std::max(norm2, 1e-300));
    for (int j = 0; j < spec.feature_dim; ++j) means[c * spec.feature_dim + j] *= scale;
  }

  // Each client draws from its own substream, so regeneration is
  // bit-identical regardless of evaluation order.
  for (int k = 0; k < spec.num_clients; ++k) {
    Rng rng(subseed(spec.seed, stream::client_data, static_cast<std::uint64_t>(k)));
    ClientDataset& ds = pop.clients[k];
    ds.client_id = k;
    ds.feature_dim = spec.feature_dim;
    std::vector<double> mix =
        detail::dirichlet_mixture(rng, spec.num_classes, spec.label_concentration);
    int n_k = counts[k];
    ds.labels.resize(n_k);
    ds.features.resize(static_cast<size_t>(n_k) * spec.feature_dim);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int i = 0; i < n_k; ++i) {
      int y = detail::sample_categorical(rng, mix);
      ds.labels[i] = y;
      double* x = ds.features.data() + static_cast<size_t>(i) * spec.feature_dim;
      const double* mu = means.data() + static_cast<size_t>(y) * spec.feature_dim;
      for (int j = 0; j < spec.feature_dim; ++j) x[j] = mu[j] + noise(rng);
    }
  }
  return pop;
}

// Client-level split: clients are shuffled by seed, the first
// round(test_fraction*K) become the test side, and both halves keep
// ascending client-id order.
inline std::pair<ClientPopulation, ClientPopulation> split_train_test(
    const ClientPopulation& population, double test_fraction, std::uint64_t seed) {
  int k = population.num_clients();
  if (k < 2) throw ConfigError("split requires a population with >= 2 clients");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("split.test_fraction must lie in (0,1)");
  int n_test = static_cast<int>(std::llround(test_fraction * k));
  if (n_test < 1 || n_test >= k)
    throw ConfigError("split.test_fraction leaves one side empty");

  std::vector<int> ids(k);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(subseed(seed, stream::split));
  std::shuffle(ids.begin(), ids.end(), rng);

  std::vector<bool> is_test(k, false);
  for (int i = 0; i < n_test; ++i) is_test[ids[i]] = true;

  ClientPopulation train, test;
  train.feature_dim = test.feature_dim = population.feature_dim;
  train.num_classes = test.num_classes = population.num_classes;
  for (const auto& c : population.clients)
    (is_test[c.client_id] ? test : train).clients.push_back(c);
  return {std::move(train), std::move(test)};
}

// Self-describing JSON dump for reuse across runs.
inline void save_population(const ClientPopulation& pop, const PopulationSpec& spec,
                            const std::string& path) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["spec"] = {{"seed", spec.seed},
               {"num_clients", spec.num_clients},
               {"min_points", spec.min_points},
               {"max_points", spec.max_points},
               {"count_shape", spec.count_shape},
               {"label_concentration", spec.label_concentration},
               {"feature_dim", spec.feature_dim},
               {"num_classes", spec.num_classes},
               {"class_separation", spec.class_separation}};
  j["feature_dim"] = pop.feature_dim;
  j["num_classes"] = pop.num_classes;
  auto clients = nlohmann::ordered_json::array();
  for (const auto& c : pop.clients) {
    clients.push_back({{"id", c.client_id},
                       {"labels", c.labels},
                       {"features", c.features}});
  }
  j["clients"] = std::move(clients);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open population dump for writing: " + path);
  out << j.dump(2) << '\n';
}

inline ClientPopulation load_population(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open population dump: " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  ClientPopulation pop;
  pop.feature_dim = j.at("feature_dim").get<int>();
  pop.num_classes = j.at("num_classes").get<int>();
  for (const auto& cj : j.at("clients")) {
    ClientDataset ds;
    ds.client_id = cj.at("id").get<int>();
    ds.feature_dim = pop.feature_dim;
    ds.labels = cj.at("labels").get<std::vector<int>>();
    ds.features = cj.at("features").get<std::vector<double>>();
    pop.clients.push_back(std::move(ds));
  }
  return pop;
}

}  // namespace fedsim
