#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "elbert/model/parameters.h"
#include "elbert/model/weight_file.h"
#include "elbert/training/objective.h"

namespace elbert {

struct TrainConfig {
  double learning_rate = 3e-5;
  size_t batch_size = 32;
  size_t epochs = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  uint64_t seed = 0;
  // Stop after the first epoch whose validation accuracy reaches this value
  // (0 disables).
  double stop_at_accuracy = 0.0;

  void validate() const;
};

struct EpochMetrics {
  size_t epoch = 0;
  double mean_loss = 0.0;
  // Full-depth accuracy; empty when no validation set was given.
  std::optional<double> validation_accuracy;
};

struct AdamState {
  Parameters first_moment;
  Parameters second_moment;
  uint64_t step = 0;

  static AdamState zeros_like(const Parameters& params);
};

struct TrainResult {
  Parameters params;
  AdamState optimizer;
  std::vector<EpochMetrics> history;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

void adam_step(Parameters& params, const Parameters& gradient,
               AdamState& state, const TrainConfig& config);

// Mini-batch training of the weighted multi-exit loss. Shuffling and batch
// accumulation follow a fixed order, so a seed fully determines the result.
// Throws std::runtime_error if the loss becomes non-finite.
TrainResult train(Parameters initial, std::span<const Example> train_set,
                  std::span<const Example> validation_set,
                  const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

double full_depth_accuracy(const Parameters& params,
                           std::span<const Example> examples);

// Weight file plus optimizer moments ("adam.m.*", "adam.v.*") and the step.
WeightFile to_checkpoint(const Parameters& params, const AdamState& optimizer);
AdamState optimizer_from(const WeightFile& file, const Parameters& params);

}  // namespace elbert
