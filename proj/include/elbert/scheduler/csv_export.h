#pragma once

#include <ostream>
#include <span>
#include <string>

#include "elbert/scheduler/cost_model.h"
#include "elbert/scheduler/step_log.h"

namespace elbert {

// Shortest round-trip decimal form.
std::string format_double(double value);

// sample_id,label,prediction,exit_layer,exit_stage
void write_sample_csv(std::ostream& out, const StepLog& log);
// step,strategy,occupancy (header written once, logs concatenated)
void write_step_csv(std::ostream& out, std::span<const StepLog> logs);
// strategy,n_slots,accuracy,compute_ratio,sim_time,throughput,speedup
void write_comparison_csv(std::ostream& out, std::span<const StrategyRow> rows);

}  // namespace elbert
