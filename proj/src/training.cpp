// Copyright 2026 The dramtol Authors
// SPDX-License-Identifier: Apache-2.0

#include "dramtol/training.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "dramtol/error.hpp"
#include "dramtol/rng.hpp"

namespace dramtol {

namespace {

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  StreamEngine eng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[eng.below(i)]);
  return order;
}

void gather(const Dataset& d, std::span<const std::size_t> idx, std::vector<double>& x,
            std::vector<std::uint32_t>& y) {
  x.clear();
  y.clear();
  for (std::size_t i : idx) {
    const float* row = d.train_x.data() + i * d.features;
    x.insert(x.end(), row, row + d.features);
    y.push_back(d.train_y[i]);
  }
}

void sgd_step(Network& net, const Gradients& g, double lr) {
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (!net.layers[i].has_parameters()) continue;
    for (std::size_t j = 0; j < net.weights[i].size(); ++j) net.weights[i][j] -= lr * g.weights[i][j];
    for (std::size_t j = 0; j < net.biases[i].size(); ++j) net.biases[i][j] -= lr * g.biases[i][j];
  }
}

void observe_weights(const Network& net, Thresholds& thr) {
  const auto p = net.parameterized_layers();
  for (std::uint32_t k = 0; k < p.size(); ++k) {
    const DataTypeId id{DataTypeId::Kind::weight, k};
    thr.observe(id, net.weights[p[k]]);
    thr.observe(id, net.biases[p[k]]);
  }
}

void check_data(const Network& net, const Dataset& data) {
  if (net.input_size() != data.features || net.output_size() != data.classes) {
    throw Error("size_mismatch", "network shape does not match the dataset");
  }
}

// Weights plus the IFMs of one clean (storage-rounded) pass over the
// training set.
void observe_pass(const Network& net, const Dataset& data, std::size_t batch,
                  Thresholds& thr) {
  observe_weights(net, thr);
  const Dtype dtype = net.dtype;
  const LoadFn capture = [&](const DataTypeId& id, std::span<double> v) {
    storage_round(dtype, v);
    if (id.kind == DataTypeId::Kind::ifm) thr.observe(id, v);
  };
  std::vector<double> x;
  const std::size_t n = data.train_size();
  for (std::size_t b = 0; b < n; b += batch) {
    const std::size_t nb = std::min(batch, n - b);
    x.assign(data.train_x.begin() + b * data.features,
             data.train_x.begin() + (b + nb) * data.features);
    forward(net, x, nb, capture);
  }
}

std::size_t argmax(const double* z, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < n; ++c) {
    if (z[c] > z[best]) best = c;
  }
  return best;
}

}  // namespace

TrainResult train_baseline(Network init, const Dataset& data, const TrainOptions& opts) {
  check_data(init, data);
  if (opts.batch == 0) throw Error("bad_options", "batch size must be positive");
  TrainResult r;
  r.net = std::move(init);
  Network& net = r.net;
  const Dtype dtype = net.dtype;
  const LoadFn capture = [&](const DataTypeId& id, std::span<double> v) {
    r.thresholds.observe(id, v);
    storage_round(dtype, v);
  };
  std::vector<double> x, dlogits;
  std::vector<std::uint32_t> y;
  const std::size_t n = data.train_size();
  for (std::size_t e = 0; e < opts.epochs; ++e) {
    const auto order = shuffled(n, derive_seed(derive_seed(opts.seed, "train-epoch"), e));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < n; b += opts.batch) {
      const std::size_t nb = std::min(opts.batch, n - b);
      gather(data, std::span(order).subspan(b, nb), x, y);
      const auto t = forward(net, x, nb, capture);
      const double loss = softmax_cross_entropy(t.logits(), y, net.output_size(), &dlogits);
      if (!std::isfinite(loss)) {
        throw Error("divergence", "training loss became non-finite in epoch " +
                                      std::to_string(e + 1));
      }
      sgd_step(net, backward(net, t, dlogits), opts.lr);
      loss_sum += loss;
      ++batches;
    }
    r.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  observe_pass(net, data, opts.batch, r.thresholds);
  return r;
}

std::vector<double> curricular_schedule(double target_ber, std::size_t total_epochs) {
  if (total_epochs < 2) throw Error("bad_schedule", "curricular schedule needs >= 2 epochs");
  if (!(target_ber >= 0.0 && target_ber <= 0.5)) {
    throw Error("bad_schedule", "target BER must lie in [0, 0.5]");
  }
  std::vector<double> s(total_epochs, 0.0);
  if (target_ber == 0.0) return s;
  const std::size_t ramp = total_epochs - 2;
  const std::size_t steps = (ramp + 1) / 2;
  std::size_t e = 2;
  for (std::size_t j = 0; j < steps; ++j) {
    const double ber = std::ldexp(target_ber, -static_cast<int>(steps - 1 - j));
    const std::size_t len = (j == 0 && ramp % 2 == 1) ? 1 : 2;
    for (std::size_t i = 0; i < len; ++i) s[e++] = ber;
  }
  return s;
}

double retrain_epoch(Network& net, const Thresholds& thresholds, const Dataset& data,
                     const DramEnv& env, double ber, std::size_t epoch,
                     const TrainOptions& opts) {
  check_data(net, data);
  DramEnv e = env;
  e.ber = ber;
  e.ber_override.clear();
  e.correction = Correction::zero;
  const std::uint64_t epoch_seed = derive_seed(derive_seed(opts.seed, "retrain-epoch"), epoch);
  CompiledEnv ce(e, net, thresholds, opts.batch, epoch_seed);
  const std::size_t n = data.train_size();
  const auto order = shuffled(n, derive_seed(epoch_seed, "order"));
  std::vector<double> x, dlogits;
  std::vector<std::uint32_t> y;
  double loss_sum = 0.0;
  std::size_t batches = 0;
  bool saw_nan = false;
  for (std::size_t b = 0, access = 0; b < n; b += opts.batch, ++access) {
    const std::size_t nb = std::min(opts.batch, n - b);
    gather(data, std::span(order).subspan(b, nb), x, y);
    const auto t = forward(net, x, nb, ce.loader(access));
    const double loss = softmax_cross_entropy(t.logits(), y, net.output_size(), &dlogits);
    if (!std::isfinite(loss)) {
      saw_nan = true;
      continue;
    }
    sgd_step(net, backward(net, t, dlogits), opts.lr);
    loss_sum += loss;
    ++batches;
  }
  if (saw_nan || batches == 0) return std::nan("");
  return loss_sum / static_cast<double>(batches);
}

RetrainResult curricular_retrain(Network net, const Thresholds& thresholds,
                                 const Dataset& data, const DramEnv& env,
                                 std::span<const double> schedule, const TrainOptions& opts) {
  RetrainResult r;
  r.thresholds = thresholds;
  int nan_run = 0;
  for (std::size_t e = 0; e < schedule.size(); ++e) {
    const double loss = retrain_epoch(net, r.thresholds, data, env, schedule[e], e, opts);
    r.epoch_loss.push_back(loss);
    nan_run = std::isnan(loss) ? nan_run + 1 : 0;
    if (nan_run >= 2) {
      throw Error("accuracy_collapse",
                  "retraining loss was NaN for two consecutive epochs (epoch " +
                      std::to_string(e + 1) + ")");
    }
    observe_pass(net, data, opts.batch, r.thresholds);
  }
  r.net = std::move(net);
  return r;
}

AccuracyStats evaluate_accuracy(const Network& net, const Thresholds& thresholds,
                                const Dataset& data, const DramEnv* env, std::size_t trials,
                                std::uint64_t seed, const EvalOptions& opts) {
  check_data(net, data);
  if (trials == 0) throw Error("bad_options", "evaluation needs at least one trial");
  const std::size_t n = data.val_size();
  const std::size_t classes = net.output_size();
  const Dtype dtype = net.dtype;
  const LoadFn rounding = [dtype](const DataTypeId&, std::span<double> v) {
    storage_round(dtype, v);
  };
  std::vector<double> x;
  auto run = [&](auto&& make_loader) {
    std::size_t correct = 0;
    for (std::size_t b = 0, access = 0; b < n; b += opts.batch, ++access) {
      const std::size_t nb = std::min(opts.batch, n - b);
      x.assign(data.val_x.begin() + b * data.features,
               data.val_x.begin() + (b + nb) * data.features);
      const auto t = forward(net, x, nb, make_loader(access));
      const auto logits = t.logits();
      for (std::size_t s = 0; s < nb; ++s) {
        if (argmax(logits.data() + s * classes, classes) == data.val_y[b + s]) ++correct;
      }
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(n);
  };

  AccuracyStats st;
  st.trials = trials;
  if (env == nullptr) {
    const double acc = run([&](std::uint64_t) { return opts.exact ? LoadFn{} : rounding; });
    st.per_trial.assign(trials, acc);
    st.mean = acc;
    return st;
  }
  for (std::size_t t = 0; t < trials; ++t) {
    CompiledEnv ce(*env, net, thresholds, opts.batch, derive_seed(seed, t));
    st.per_trial.push_back(run([&](std::uint64_t access) { return ce.loader(access); }));
  }
  double sum = 0.0;
  for (double a : st.per_trial) sum += a;
  st.mean = sum / static_cast<double>(trials);
  if (trials > 1) {
    double ss = 0.0;
    for (double a : st.per_trial) ss += (a - st.mean) * (a - st.mean);
    st.std = std::sqrt(ss / static_cast<double>(trials - 1));
  }
  return st;
}

double clean_accuracy(const Network& net, const Dataset& data) {
  return evaluate_accuracy(net, Thresholds{}, data, nullptr, 1, 0).mean;
}

}  // namespace dramtol
