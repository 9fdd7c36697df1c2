#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "elbert/exit_policy/exit_policy.h"
#include "elbert/model/layer_trace.h"
#include "elbert/model/model.h"

namespace elbert {

enum class Strategy {
  kCase1,       // sequential, full depth
  kCase2,       // sequential, early exit
  kCase3,       // fixed batches, full depth
  kCase4,       // fixed synchronous batches, early exit
  kAlgorithm1,  // slot refill over the shared encoder
};

std::string_view strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view name);
bool is_batched(Strategy s);

struct StreamItem {
  size_t sample_id = 0;
  TokenSequence tokens;
  std::optional<size_t> label;
};

struct SampleRecord {
  size_t sample_id = 0;
  std::optional<size_t> label;
  size_t prediction = 0;
  size_t exit_layer = 0;
  ExitStage stage = ExitStage::kNone;
  LayerTrace trace;
};

// One encoder invocation. `occupancy` counts slots doing useful work,
// `width` is the tensor width actually pushed through the encoder.
struct StepRecord {
  size_t step = 0;
  size_t occupancy = 0;
  size_t refills = 0;
  size_t width = 0;
};

struct StepLog {
  Strategy strategy = Strategy::kCase1;
  size_t slots = 1;
  size_t depth = 0;  // full model depth, the compute-ratio denominator
  std::vector<StepRecord> steps;
  // In stream order, one per streamed sample.
  std::vector<SampleRecord> samples;

  size_t executed_layers() const;   // sum of per-sample exit layers
  size_t occupancy_total() const;   // sum of per-step occupancy
  std::optional<double> accuracy() const;  // over labelled samples
};

// (sum of exit layers) / (samples * depth). Throws on an empty log.
double compute_ratio(const StepLog& log, size_t depth);

}  // namespace elbert
