#include "elbert/scheduler/csv_export.h"

#include <array>
#include <charconv>

namespace elbert {

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

void write_sample_csv(std::ostream& out, const StepLog& log) {
  out << "sample_id,label,prediction,exit_layer,exit_stage\n";
  for (const auto& s : log.samples) {
    out << s.sample_id << ',' << (s.label ? std::to_string(*s.label) : "")
        << ',' << s.prediction << ',' << s.exit_layer << ','
        << stage_name(s.stage) << '\n';
  }
}

void write_step_csv(std::ostream& out, std::span<const StepLog> logs) {
  out << "step,strategy,occupancy\n";
  for (const auto& log : logs) {
    for (const auto& step : log.steps) {
      out << step.step << ',' << strategy_name(log.strategy) << ','
          << step.occupancy << '\n';
    }
  }
}

void write_comparison_csv(std::ostream& out, std::span<const StrategyRow> rows) {
  out << "strategy,n_slots,accuracy,compute_ratio,sim_time,throughput,speedup\n";
  for (const auto& r : rows) {
    out << strategy_name(r.strategy) << ',' << r.slots << ','
        << (r.accuracy ? format_double(*r.accuracy) : "") << ','
        << format_double(r.compute_ratio) << ',' << format_double(r.sim_time)
        << ',' << format_double(r.throughput) << ','
        << format_double(r.speedup) << '\n';
  }
}

}  // namespace elbert
