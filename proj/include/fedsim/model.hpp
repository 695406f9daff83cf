#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "fedsim/errors.hpp"
#include "fedsim/population.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

enum class Arch { linear, mlp };

struct ModelDims {
  int input = 1;
  int hidden = 0;  // used by mlp only
  int classes = 2;
};

inline long long param_count(Arch arch, const ModelDims& d) {
  if (arch == Arch::linear)
    return static_cast<long long>(d.input) * d.classes + d.classes;
  return static_cast<long long>(d.input) * d.hidden + d.hidden +
         static_cast<long long>(d.hidden) * d.classes + d.classes;
}

// Flat parameter vector. linear: W[C x d], b[C].
// mlp: W1[H x d], b1[H], W2[C x H], b2[C]; ReLU hidden.
struct ModelParams {
  Arch arch = Arch::linear;
  ModelDims dims;
  std::vector<double> w;
};

// FLOPs-per-input / parameter-count pair feeding the cost constants.
struct ModelDescriptor {
  double flops_per_input = 0;
  double num_params = 0;
};

inline ModelDescriptor descriptor(Arch arch, const ModelDims& d) {
  if (d.input < 1 || d.classes < 2 || (arch == Arch::mlp && d.hidden < 1))
    throw ConfigError("model dims must be positive");
  long long weight_elems =
      arch == Arch::linear
          ? static_cast<long long>(d.input) * d.classes
          : static_cast<long long>(d.input) * d.hidden +
                static_cast<long long>(d.hidden) * d.classes;
  return {2.0 * static_cast<double>(weight_elems),
          static_cast<double>(param_count(arch, d))};
}

// Named presets let desk-scale runs carry production-scale cost magnitudes.
inline ModelDescriptor descriptor_preset(const std::string& name) {
  if (name == "resnet10") return {12.5e6, 79.7e3};
  if (name == "resnet18") return {26.8e6, 177.2e3};
  if (name == "resnet26") return {41.1e6, 274.6e3};
  if (name == "resnet34") return {60.1e6, 515.6e3};
  throw ConfigError("unknown cost preset: " + name);
}

inline ModelParams init_model(std::uint64_t seed, Arch arch, const ModelDims& d) {
  if (d.input < 1 || d.classes < 2 || (arch == Arch::mlp && d.hidden < 1))
    throw ConfigError("model dims must be positive");
  ModelParams p;
  p.arch = arch;
  p.dims = d;
  p.w.assign(param_count(arch, d), 0.0);
  Rng rng(subseed(seed, stream::model_init));
  auto fill_layer = [&](std::size_t offset, long long rows, long long cols) {
    double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (long long i = 0; i < rows * cols; ++i) p.w[offset + i] = u(rng);
  };
  if (arch == Arch::linear) {
    fill_layer(0, d.classes, d.input);  // biases stay zero
  } else {
    std::size_t w1 = 0;
    std::size_t w2 = static_cast<std::size_t>(d.input) * d.hidden + d.hidden;
    fill_layer(w1, d.hidden, d.input);
    fill_layer(w2, d.classes, d.hidden);
  }
  return p;
}

namespace detail {

inline void softmax_inplace(std::vector<double>& logits) {
  double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0;
  for (auto& v : logits) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : logits) v /= sum;
}

// Parameter layout offsets for the mlp arch.
struct MlpLayout {
  std::size_t w1, b1, w2, b2;
  explicit MlpLayout(const ModelDims& d)
      : w1(0),
        b1(static_cast<std::size_t>(d.input) * d.hidden),
        w2(b1 + d.hidden),
        b2(w2 + static_cast<std::size_t>(d.hidden) * d.classes) {}
};

inline void forward_logits(const ModelParams& p, const double* x,
                           std::vector<double>& hidden, std::vector<double>& logits) {
  const ModelDims& d = p.dims;
  logits.assign(d.classes, 0.0);
  if (p.arch == Arch::linear) {
    const double* W = p.w.data();
    const double* b = p.w.data() + static_cast<std::size_t>(d.input) * d.classes;
    for (int c = 0; c < d.classes; ++c) {
      double acc = b[c];
      const double* row = W + static_cast<std::size_t>(c) * d.input;
      for (int j = 0; j < d.input; ++j) acc += row[j] * x[j];
      logits[c] = acc;
    }
    return;
  }
  MlpLayout L(d);
  hidden.assign(d.hidden, 0.0);
  for (int i = 0; i < d.hidden; ++i) {
    double acc = p.w[L.b1 + i];
    const double* row = p.w.data() + L.w1 + static_cast<std::size_t>(i) * d.input;
    for (int j = 0; j < d.input; ++j) acc += row[j] * x[j];
    hidden[i] = acc > 0 ? acc : 0.0;  // ReLU
  }
  for (int c = 0; c < d.classes; ++c) {
    double acc = p.w[L.b2 + c];
    const double* row = p.w.data() + L.w2 + static_cast<std::size_t>(c) * d.hidden;
    for (int i = 0; i < d.hidden; ++i) acc += row[i] * hidden[i];
    logits[c] = acc;
  }
}

}  // namespace detail

// Mean cross-entropy loss and gradient over the given points of one client.
// `grad` is resized and overwritten.
inline double loss_and_gradient(const ModelParams& p, const ClientDataset& data,
                                const std::vector<long long>& index_batch,
                                std::vector<double>& grad) {
  const ModelDims& d = p.dims;
  grad.assign(p.w.size(), 0.0);
  std::vector<double> hidden, logits;
  double loss = 0;
  const double inv_batch = 1.0 / static_cast<double>(index_batch.size());
  for (long long idx : index_batch) {
    const double* x = data.point(idx);
    int y = data.labels[static_cast<std::size_t>(idx)];
    detail::forward_logits(p, x, hidden, logits);
    detail::softmax_inplace(logits);
    loss -= std::log(std::max(logits[y], 1e-300)) * inv_batch;
    // dL/dlogit = softmax - onehot
    if (p.arch == Arch::linear) {
      double* gW = grad.data();
      double* gb = grad.data() + static_cast<std::size_t>(d.input) * d.classes;
      for (int c = 0; c < d.classes; ++c) {
        double dl = (logits[c] - (c == y ? 1.0 : 0.0)) * inv_batch;
        double* row = gW + static_cast<std::size_t>(c) * d.input;
        for (int j = 0; j < d.input; ++j) row[j] += dl * x[j];
        gb[c] += dl;
      }
    } else {
      detail::MlpLayout L(d);
      std::vector<double> dhidden(d.hidden, 0.0);
      for (int c = 0; c < d.classes; ++c) {
        double dl = (logits[c] - (c == y ? 1.0 : 0.0)) * inv_batch;
        double* row = grad.data() + L.w2 + static_cast<std::size_t>(c) * d.hidden;
        const double* w_row = p.w.data() + L.w2 + static_cast<std::size_t>(c) * d.hidden;
        for (int i = 0; i < d.hidden; ++i) {
          row[i] += dl * hidden[i];
          dhidden[i] += dl * w_row[i];
        }
        grad[L.b2 + c] += dl;
      }
      for (int i = 0; i < d.hidden; ++i) {
        if (hidden[i] <= 0) continue;  // ReLU gate
        double dh = dhidden[i];
        double* row = grad.data() + L.w1 + static_cast<std::size_t>(i) * d.input;
        for (int j = 0; j < d.input; ++j) row[j] += dh * x[j];
        grad[L.b1 + i] += dh;
      }
    }
  }
  return loss;
}

struct LocalTrainReport {
  std::vector<double> params;       // updated parameter vector
  long long num_updates = 0;        // mini-batch steps taken
  long long samples_processed = 0;
};

// Mini-batch SGD with momentum over round(passes * n_k) samples drawn in
// seeded-shuffled order (fresh permutation per sweep). Fractional passes
// process that fraction of the client's data; the floor is one batch worth.
inline LocalTrainReport local_train(const ModelParams& global, const ClientDataset& data,
                                    double passes, int batch_size, double lr,
                                    double momentum, std::uint64_t seed) {
  if (data.size() < 1) throw TrainingFault("local_train on empty client dataset");
  if (batch_size < 1) throw ConfigError("local.batch_size must be >= 1");
  if (!(passes > 0)) throw ConfigError("passes must be > 0");

  const long long n_k = data.size();
  long long samples = std::llround(passes * static_cast<double>(n_k));
  samples = std::max(samples, std::min<long long>(batch_size, n_k));
  samples = std::max<long long>(samples, 1);

  // Build the visiting order: concatenated seeded shuffles of [0, n_k).
  Rng rng(subseed(seed, stream::local_shuffle));
  std::vector<long long> order;
  order.reserve(samples);
  std::vector<long long> perm(n_k);
  std::iota(perm.begin(), perm.end(), 0);
  while (static_cast<long long>(order.size()) < samples) {
    std::shuffle(perm.begin(), perm.end(), rng);
    long long take = std::min<long long>(samples - order.size(), n_k);
    order.insert(order.end(), perm.begin(), perm.begin() + take);
  }

  LocalTrainReport report;
  report.samples_processed = samples;

  ModelParams work = global;
  std::vector<double> velocity(global.w.size(), 0.0);
  std::vector<double> grad;
  std::vector<long long> batch;
  for (long long start = 0; start < samples; start += batch_size) {
    long long end = std::min(samples, start + batch_size);
    batch.assign(order.begin() + start, order.begin() + end);
    double loss = loss_and_gradient(work, data, batch, grad);
    if (!std::isfinite(loss)) throw TrainingFault("non-finite local training loss");
    for (std::size_t i = 0; i < grad.size(); ++i) {
      if (!std::isfinite(grad[i])) throw TrainingFault("non-finite local gradient");
      velocity[i] = momentum * velocity[i] + grad[i];
      work.w[i] -= lr * velocity[i];
    }
    ++report.num_updates;
  }
  report.params = std::move(work.w);
  return report;
}

inline double evaluate(const ModelParams& params, const ClientPopulation& test) {
  long long total = test.total_points();
  if (total == 0) throw ConfigError("evaluate on empty test population");
  long long correct = 0;
  std::vector<double> hidden, logits;
  for (const auto& c : test.clients) {
    for (long long i = 0; i < c.size(); ++i) {
      detail::forward_logits(params, c.point(i), hidden, logits);
      int pred = static_cast<int>(
          std::max_element(logits.begin(), logits.end()) - logits.begin());
      if (pred == c.labels[static_cast<std::size_t>(i)]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace fedsim
