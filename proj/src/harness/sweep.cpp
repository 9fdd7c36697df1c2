#include "elbert/harness/sweep.h"

#include <stdexcept>

#include "elbert/scheduler/csv_export.h"
#include "elbert/scheduler/strategies.h"

namespace elbert {

namespace {

SweepRow summarize(const StepLog& log, size_t depth) {
  SweepRow row;
  row.accuracy = log.accuracy().value_or(0.0);
  row.compute_ratio = compute_ratio(log, depth);
  row.mean_exit_layer = static_cast<double>(log.executed_layers()) /
                        static_cast<double>(log.samples.size());
  return row;
}

}  // namespace

std::vector<double> default_delta_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 10; ++i) grid.push_back(i / 10.0);
  return grid;
}

SweepResult sweep_delta(const Parameters& model,
                        std::span<const StreamItem> stream,
                        std::span<const double> grid, const ExitPolicy& base,
                        size_t slots) {
  if (stream.empty()) throw std::invalid_argument("sweep_delta: empty dataset");
  SweepResult result;
  const size_t depth = model.config.depth;
  for (double delta : grid) {
    ExitPolicy policy = base;
    policy.delta = delta;
    SweepRow row = summarize(run_algorithm1(stream, model, policy, slots), depth);
    row.delta = delta;
    row.criterion = std::string(criterion_name(policy.criterion));
    row.window = policy.window_string();
    result.rows.push_back(std::move(row));
  }
  SweepRow reference = summarize(run_case1(stream, model), depth);
  reference.delta = 0.0;
  reference.criterion = "none";
  reference.window = "inf";
  result.rows.push_back(std::move(reference));
  return result;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << "delta,criterion,window,accuracy,compute_ratio,mean_exit_layer\n";
  for (const auto& r : result.rows) {
    out << format_double(r.delta) << ',' << r.criterion << ',' << r.window << ','
        << format_double(r.accuracy) << ',' << format_double(r.compute_ratio)
        << ',' << format_double(r.mean_exit_layer) << '\n';
  }
}

}  // namespace elbert
