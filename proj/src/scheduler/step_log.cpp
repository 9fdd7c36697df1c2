#include "elbert/scheduler/step_log.h"

#include <stdexcept>

namespace elbert {

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kCase1:
      return "case1";
    case Strategy::kCase2:
      return "case2";
    case Strategy::kCase3:
      return "case3";
    case Strategy::kCase4:
      return "case4";
    case Strategy::kAlgorithm1:
      return "alg1";
  }
  return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (auto s : {Strategy::kCase1, Strategy::kCase2, Strategy::kCase3,
                 Strategy::kCase4, Strategy::kAlgorithm1}) {
    if (strategy_name(s) == name) return s;
  }
  return std::nullopt;
}

bool is_batched(Strategy s) {
  return s == Strategy::kCase3 || s == Strategy::kCase4 ||
         s == Strategy::kAlgorithm1;
}

size_t StepLog::executed_layers() const {
  size_t total = 0;
  for (const auto& s : samples) total += s.exit_layer;
  return total;
}

size_t StepLog::occupancy_total() const {
  size_t total = 0;
  for (const auto& s : steps) total += s.occupancy;
  return total;
}

std::optional<double> StepLog::accuracy() const {
  size_t labelled = 0;
  size_t correct = 0;
  for (const auto& s : samples) {
    if (!s.label) continue;
    ++labelled;
    if (*s.label == s.prediction) ++correct;
  }
  if (labelled == 0) return std::nullopt;
  return static_cast<double>(correct) / static_cast<double>(labelled);
}

double compute_ratio(const StepLog& log, size_t depth) {
  if (log.samples.empty()) {
    throw std::invalid_argument("compute_ratio: empty log");
  }
  if (depth == 0) throw std::invalid_argument("compute_ratio: depth is 0");
  return static_cast<double>(log.executed_layers()) /
         (static_cast<double>(log.samples.size()) * static_cast<double>(depth));
}

}  // namespace elbert
