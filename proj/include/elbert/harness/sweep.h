#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

#include "elbert/exit_policy/exit_policy.h"
#include "elbert/model/parameters.h"
#include "elbert/scheduler/step_log.h"

namespace elbert {

struct SweepRow {
  double delta = 0.0;
  std::string criterion;  // "none" on the full-depth reference row
  std::string window;     // "inf" when the second stage is off
  double accuracy = 0.0;
  double compute_ratio = 0.0;
  double mean_exit_layer = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // one per grid point, then the reference row
};

// 0.1, 0.2, ..., 1.0
std::vector<double> default_delta_grid();

// For every delta runs the slot-refill scheduler with `base` (delta
// replaced) and appends the no-exit full-depth reference row.
SweepResult sweep_delta(const Parameters& model,
                        std::span<const StreamItem> stream,
                        std::span<const double> grid, const ExitPolicy& base,
                        size_t slots = 8);

// delta,criterion,window,accuracy,compute_ratio,mean_exit_layer
void write_sweep_csv(std::ostream& out, const SweepResult& result);

}  // namespace elbert
