#include "elbert/training/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "elbert/model/model.h"

namespace elbert {

namespace {

Parameters zeroed(const Parameters& like) {
  Parameters p = like;
  for (auto& t : p.tensors()) t.tensor->fill(0.0);
  return p;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) {
    throw std::invalid_argument("TrainConfig: learning rate must be >= 0");
  }
  if (batch_size == 0) {
    throw std::invalid_argument("TrainConfig: batch size must be >= 1");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("TrainConfig: moment decays must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("TrainConfig: epsilon must be > 0");
  }
}

AdamState AdamState::zeros_like(const Parameters& params) {
  return {zeroed(params), zeroed(params), 0};
}

void adam_step(Parameters& params, const Parameters& gradient,
               AdamState& state, const TrainConfig& config) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  auto p = params.tensors();
  auto g = gradient.tensors();
  auto m = state.first_moment.tensors();
  auto v = state.second_moment.tensors();
  for (size_t k = 0; k < p.size(); ++k) {
    auto pd = p[k].tensor->data();
    auto gd = g[k].tensor->data();
    auto md = m[k].tensor->data();
    auto vd = v[k].tensor->data();
    for (size_t i = 0; i < pd.size(); ++i) {
      md[i] = config.beta1 * md[i] + (1.0 - config.beta1) * gd[i];
      vd[i] = config.beta2 * vd[i] + (1.0 - config.beta2) * gd[i] * gd[i];
      const double m_hat = md[i] / correction1;
      const double v_hat = vd[i] / correction2;
      pd[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

double full_depth_accuracy(const Parameters& params,
                           std::span<const Example> examples) {
  if (examples.empty()) return 0.0;
  size_t correct = 0;
  for (const auto& ex : examples) {
    const auto r = forward_with_trace(ex.tokens, params, std::nullopt);
    if (r.prediction == ex.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

TrainResult train(Parameters initial, std::span<const Example> train_set,
                  std::span<const Example> validation_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  initial.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty dataset");
  for (const auto& ex : train_set) {
    if (ex.label >= initial.config.classes) {
      throw std::invalid_argument("train: label " + std::to_string(ex.label) +
                                  " out of range");
    }
  }

  TrainResult result{std::move(initial), {}, {}};
  result.optimizer = AdamState::zeros_like(result.params);
  std::mt19937_64 rng(config.seed);
  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), size_t{0});
  Parameters gradient = zeroed(result.params);

  for (size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (size_t start = 0; start < order.size(); start += config.batch_size) {
      const size_t end = std::min(order.size(), start + config.batch_size);
      for (auto& t : gradient.tensors()) t.tensor->fill(0.0);
      double batch_loss = 0.0;
      for (size_t i = start; i < end; ++i) {
        batch_loss +=
            accumulate_example_gradient(result.params, train_set[order[i]],
                                        gradient);
      }
      if (!std::isfinite(batch_loss)) {
        throw std::runtime_error(
            "train: non-finite loss in epoch " + std::to_string(epoch) +
            " at batch starting " + std::to_string(start) +
            "; lower the learning rate");
      }
      loss_sum += batch_loss;
      const double inv = 1.0 / static_cast<double>(end - start);
      for (auto& t : gradient.tensors()) {
        for (double& v : t.tensor->data()) v *= inv;
      }
      adam_step(result.params, gradient, result.optimizer, config);
    }

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.mean_loss = loss_sum / static_cast<double>(order.size());
    if (!validation_set.empty()) {
      metrics.validation_accuracy =
          full_depth_accuracy(result.params, validation_set);
    }
    result.history.push_back(metrics);
    if (on_epoch) on_epoch(metrics);
    if (config.stop_at_accuracy > 0.0 && metrics.validation_accuracy &&
        *metrics.validation_accuracy >= config.stop_at_accuracy) {
      break;
    }
  }
  return result;
}

WeightFile to_checkpoint(const Parameters& params, const AdamState& optimizer) {
  WeightFile file = to_weight_file(params);
  file.metadata.emplace_back("adam.step", std::to_string(optimizer.step));
  for (const auto& t : optimizer.first_moment.tensors()) {
    file.tensors.push_back({"adam.m." + t.name, *t.tensor});
  }
  for (const auto& t : optimizer.second_moment.tensors()) {
    file.tensors.push_back({"adam.v." + t.name, *t.tensor});
  }
  return file;
}

AdamState optimizer_from(const WeightFile& file, const Parameters& params) {
  AdamState state = AdamState::zeros_like(params);
  const std::string* step = file.find_metadata("adam.step");
  if (step == nullptr) return state;
  state.step = std::stoull(*step);
  auto load = [&](Parameters& into, const std::string& prefix) {
    for (auto& t : into.tensors()) {
      const Matrix* stored = file.find_tensor(prefix + t.name);
      if (stored == nullptr || !stored->same_shape(*t.tensor)) {
        throw std::runtime_error("checkpoint: bad optimizer tensor " + prefix +
                                 t.name);
      }
      *t.tensor = *stored;
    }
  };
  load(state.first_moment, "adam.m.");
  load(state.second_moment, "adam.v.");
  return state;
}

}  // namespace elbert
