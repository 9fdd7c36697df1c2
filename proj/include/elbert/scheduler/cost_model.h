#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elbert/exit_policy/exit_policy.h"
#include "elbert/model/parameters.h"
#include "elbert/scheduler/step_log.h"

namespace elbert {

// Affine latency model of one encoder invocation at tensor width n:
// step_base + step_per_slot * n. Saturation of batched throughput follows
// from the fixed step_base being amortized over n slots.
struct CostModel {
  double step_base = 0.0;
  double step_per_slot = 1.0;
  double embed_per_sample = 0.0;
  double classifier_per_slot = 0.0;

  // Solves for (step_base, step_per_slot) so that full-depth batched
  // inference at widths n_low and n_high yields the given throughputs.
  static CostModel calibrate(size_t depth, size_t n_low, double throughput_low,
                             size_t n_high, double throughput_high);
  // 38 text/s at width 1 and 240 text/s at width 32 for a 24-layer model.
  static CostModel reference();

  double step_time(size_t width) const {
    return step_base + step_per_slot * static_cast<double>(width);
  }
  // Throws std::invalid_argument unless step_base >= 0, step_per_slot > 0
  // and the overheads are non-negative.
  void validate() const;
};

struct LatencyEstimate {
  double total_time = 0.0;
  double throughput = 0.0;  // samples per unit time
};

// Sum of step_time(width) over the log's steps, plus embedding per sample and
// classifier per occupied slot-step.
LatencyEstimate simulate_latency(const StepLog& log, const CostModel& cost);

struct StrategyRow {
  Strategy strategy = Strategy::kCase1;
  size_t slots = 1;
  std::optional<double> accuracy;
  double compute_ratio = 0.0;
  double sim_time = 0.0;
  double throughput = 0.0;
  double speedup = 0.0;  // Case 1 time over this strategy's time
};

struct StrategyComparison {
  std::vector<StrategyRow> rows;  // case1, case2, case3, case4, alg1
  std::vector<StepLog> logs;      // same order
};

// Runs every strategy on the same stream. Cases 1 and 3 ignore the policy.
StrategyComparison compare_strategies(std::span<const StreamItem> stream,
                                      const Parameters& model,
                                      const std::optional<ExitPolicy>& policy,
                                      size_t slots, const CostModel& cost,
                                      size_t depth_override = 0);

}  // namespace elbert
