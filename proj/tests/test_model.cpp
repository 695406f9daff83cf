#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "fedsim/model.hpp"
#include "fedsim/population.hpp"

using namespace fedsim;

namespace {

// Random small instance for gradient and descent checks.
struct SmallInstance {
  ModelParams params;
  ClientDataset data;
};

SmallInstance make_instance(std::uint64_t seed, bool mlp) {
  Rng rng(mix64(seed));
  std::uniform_int_distribution<int> d_dist(2, 5), c_dist(2, 4), h_dist(2, 6);
  ModelDims dims;
  dims.input = d_dist(rng);
  dims.classes = c_dist(rng);
  dims.hidden = mlp ? h_dist(rng) : 0;
  Arch arch = mlp ? Arch::mlp : Arch::linear;

  SmallInstance inst;
  inst.params = init_model(seed, arch, dims);
  // Perturb away from the symmetric init so ReLU gates are in general position.
  std::normal_distribution<double> g(0.0, 0.5);
  for (auto& w : inst.params.w) w += g(rng);

  inst.data.client_id = 0;
  inst.data.feature_dim = dims.input;
  std::uniform_int_distribution<int> y_dist(0, dims.classes - 1);
  int n = 10;
  for (int i = 0; i < n; ++i) {
    inst.data.labels.push_back(y_dist(rng));
    for (int j = 0; j < dims.input; ++j) inst.data.features.push_back(g(rng) * 2.0);
  }
  return inst;
}

double loss_at(const ModelParams& p, const ClientDataset& data,
               const std::vector<long long>& batch) {
  std::vector<double> grad;
  return loss_and_gradient(p, data, batch, grad);
}

// Central finite differences, the independent oracle for the analytic gradient.
std::vector<double> fd_gradient(const ModelParams& p, const ClientDataset& data,
                                const std::vector<long long>& batch, double h) {
  std::vector<double> g(p.w.size());
  ModelParams probe = p;
  for (std::size_t i = 0; i < p.w.size(); ++i) {
    probe.w[i] = p.w[i] + h;
    double up = loss_at(probe, data, batch);
    probe.w[i] = p.w[i] - h;
    double dn = loss_at(probe, data, batch);
    probe.w[i] = p.w[i];
    g[i] = (up - dn) / (2.0 * h);
  }
  return g;
}

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0, norm = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    norm += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
}

}  // namespace

TEST_CASE("init is deterministic and analytically sized") {
  ModelDims lin{4, 0, 3};
  ModelParams a = init_model(11, Arch::linear, lin);
  ModelParams b = init_model(11, Arch::linear, lin);
  REQUIRE(a.w == b.w);
  REQUIRE(static_cast<long long>(a.w.size()) == 4 * 3 + 3);

  ModelDims mlp{8, 16, 5};
  ModelParams m = init_model(3, Arch::mlp, mlp);
  REQUIRE(static_cast<long long>(m.w.size()) == 8 * 16 + 16 + 16 * 5 + 5);
  REQUIRE(param_count(Arch::mlp, mlp) == 229);
}

TEST_CASE("descriptor: analytic counts and presets") {
  ModelDims lin{4, 0, 3};
  ModelDescriptor d = descriptor(Arch::linear, lin);
  REQUIRE(d.num_params == 15.0);
  REQUIRE(d.flops_per_input == 24.0);

  ModelDescriptor r10 = descriptor_preset("resnet10");
  REQUIRE(r10.flops_per_input == 12.5e6);
  REQUIRE(r10.num_params == 79.7e3);
  ModelDescriptor r18 = descriptor_preset("resnet18");
  REQUIRE(r18.flops_per_input == 26.8e6);
  REQUIRE(r18.num_params == 177.2e3);
  REQUIRE_THROWS_AS(descriptor_preset("resnet999"), ConfigError);
}

TEST_CASE("local_train sample accounting") {
  SmallInstance inst = make_instance(5, true);
  inst.data.labels.resize(10);
  inst.data.features.resize(10 * inst.data.feature_dim);

  auto r1 = local_train(inst.params, inst.data, 1.0, 5, 0.01, 0.0, 1);
  REQUIRE(r1.samples_processed == 10);
  REQUIRE(r1.num_updates == 2);

  auto r2 = local_train(inst.params, inst.data, 0.5, 5, 0.01, 0.0, 1);
  REQUIRE(r2.samples_processed == 5);
  REQUIRE(r2.num_updates == 1);

  inst.data.labels.resize(7);
  inst.data.features.resize(7 * inst.data.feature_dim);
  auto r3 = local_train(inst.params, inst.data, 2.0, 5, 0.01, 0.0, 1);
  REQUIRE(r3.samples_processed == 14);
  REQUIRE(r3.num_updates == 3);
}

TEST_CASE("local_train is bit-deterministic") {
  SmallInstance inst = make_instance(8, true);
  auto a = local_train(inst.params, inst.data, 2.0, 3, 0.05, 0.9, 77);
  auto b = local_train(inst.params, inst.data, 2.0, 3, 0.05, 0.9, 77);
  REQUIRE(a.params == b.params);
  REQUIRE(a.num_updates == b.num_updates);
  REQUIRE(a.samples_processed == b.samples_processed);
}

TEST_CASE("analytic gradient matches central finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SmallInstance inst = make_instance(seed, seed % 2 == 0);
    std::vector<long long> batch(inst.data.size());
    std::iota(batch.begin(), batch.end(), 0);
    std::vector<double> analytic;
    loss_and_gradient(inst.params, inst.data, batch, analytic);
    std::vector<double> numeric = fd_gradient(inst.params, inst.data, batch, 1e-5);
    REQUIRE(rel_error(analytic, numeric) <= 1e-4);
  }
}

TEST_CASE("one small full-batch step never increases the loss") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SmallInstance inst = make_instance(seed + 1000, seed % 2 == 0);
    std::vector<long long> batch(inst.data.size());
    std::iota(batch.begin(), batch.end(), 0);
    std::vector<double> grad;
    double before = loss_and_gradient(inst.params, inst.data, batch, grad);
    ModelParams stepped = inst.params;
    const double lr = 1e-4;
    for (std::size_t i = 0; i < grad.size(); ++i) stepped.w[i] -= lr * grad[i];
    double after = loss_at(stepped, inst.data, batch);
    REQUIRE(after <= before + 1e-12);
  }
}

TEST_CASE("exploding update raises a training fault") {
  SmallInstance inst = make_instance(4, true);
  REQUIRE(inst.data.size() > 3);
  REQUIRE_THROWS_AS(local_train(inst.params, inst.data, 2.0, 3, 1e200, 0.9, 5),
                    TrainingFault);
}

TEST_CASE("evaluate: constant predictor and chance level") {
  // All-label-0 test set; bias forces class 0.
  ModelDims lin{3, 0, 4};
  ModelParams p = init_model(1, Arch::linear, lin);
  std::fill(p.w.begin(), p.w.end(), 0.0);
  p.w[3 * 4] = 10.0;  // bias of class 0

  ClientPopulation test;
  test.feature_dim = 3;
  test.num_classes = 4;
  ClientDataset ds;
  ds.client_id = 0;
  ds.feature_dim = 3;
  for (int i = 0; i < 50; ++i) {
    ds.labels.push_back(0);
    for (int j = 0; j < 3; ++j) ds.features.push_back(i * 0.1 + j);
  }
  test.clients.push_back(ds);
  REQUIRE(evaluate(p, test) == 1.0);

  // Random init on a balanced set sits near 1/C.
  PopulationSpec s;
  s.seed = 9;
  s.num_clients = 4;
  s.min_points = s.max_points = 500;
  s.count_shape = 0;
  s.label_concentration = 1e6;
  s.feature_dim = 6;
  s.num_classes = 5;
  s.class_separation = 1.0;
  ClientPopulation balanced = generate_population(s);
  double acc_sum = 0;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    ModelParams rp = init_model(seed, Arch::mlp, ModelDims{6, 8, 5});
    acc_sum += evaluate(rp, balanced);
  }
  REQUIRE(std::abs(acc_sum / 5.0 - 0.2) < 0.1);
}
