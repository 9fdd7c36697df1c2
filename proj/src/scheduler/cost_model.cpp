#include "elbert/scheduler/cost_model.h"

#include <stdexcept>

#include "elbert/scheduler/strategies.h"

namespace elbert {

CostModel CostModel::calibrate(size_t depth, size_t n_low,
                               double throughput_low, size_t n_high,
                               double throughput_high) {
  if (depth == 0 || n_low == 0 || n_high <= n_low || !(throughput_low > 0.0) ||
      !(throughput_high > 0.0)) {
    throw std::invalid_argument("CostModel::calibrate: bad calibration points");
  }
  // Full batches at width n: throughput = n / (depth * step_time(n)).
  const double d = static_cast<double>(depth);
  const double lo = static_cast<double>(n_low);
  const double hi = static_cast<double>(n_high);
  const double time_low = lo / (d * throughput_low);
  const double time_high = hi / (d * throughput_high);
  CostModel cm;
  cm.step_per_slot = (time_high - time_low) / (hi - lo);
  cm.step_base = time_low - cm.step_per_slot * lo;
  cm.validate();
  return cm;
}

CostModel CostModel::reference() { return calibrate(24, 1, 38.0, 32, 240.0); }

void CostModel::validate() const {
  if (!(step_base >= 0.0)) {
    throw std::invalid_argument("CostModel: step_base must be >= 0");
  }
  if (!(step_per_slot > 0.0)) {
    throw std::invalid_argument("CostModel: step_per_slot must be > 0");
  }
  if (!(embed_per_sample >= 0.0) || !(classifier_per_slot >= 0.0)) {
    throw std::invalid_argument("CostModel: overheads must be >= 0");
  }
}

LatencyEstimate simulate_latency(const StepLog& log, const CostModel& cost) {
  cost.validate();
  LatencyEstimate est;
  for (const auto& step : log.steps) {
    est.total_time += cost.step_time(step.width);
    est.total_time += cost.classifier_per_slot * static_cast<double>(step.occupancy);
  }
  est.total_time += cost.embed_per_sample * static_cast<double>(log.samples.size());
  est.throughput = est.total_time > 0.0
                       ? static_cast<double>(log.samples.size()) / est.total_time
                       : 0.0;
  return est;
}

StrategyComparison compare_strategies(std::span<const StreamItem> stream,
                                      const Parameters& model,
                                      const std::optional<ExitPolicy>& policy,
                                      size_t slots, const CostModel& cost,
                                      size_t depth_override) {
  StrategyComparison out;
  out.logs.push_back(run_case1(stream, model, depth_override));
  out.logs.push_back(run_case2(stream, model, policy, depth_override));
  out.logs.push_back(run_case3(stream, model, slots, depth_override));
  out.logs.push_back(run_case4(stream, model, policy, slots, depth_override));
  out.logs.push_back(
      run_algorithm1(stream, model, policy, slots, depth_override));

  double baseline = 0.0;
  for (const auto& log : out.logs) {
    const LatencyEstimate est = simulate_latency(log, cost);
    if (log.strategy == Strategy::kCase1) baseline = est.total_time;
    StrategyRow row;
    row.strategy = log.strategy;
    row.slots = log.slots;
    row.accuracy = log.accuracy();
    row.compute_ratio =
        log.samples.empty() ? 0.0 : compute_ratio(log, model.config.depth);
    row.sim_time = est.total_time;
    row.throughput = est.throughput;
    row.speedup = est.total_time > 0.0 ? baseline / est.total_time : 0.0;
    out.rows.push_back(row);
  }
  return out;
}

}  // namespace elbert
