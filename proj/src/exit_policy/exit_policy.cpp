#include "elbert/exit_policy/exit_policy.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace elbert {

std::string_view criterion_name(WindowCriterion c) {
  switch (c) {
    case WindowCriterion::kBiasTrend:
      return "bias-trend";
    case WindowCriterion::kRange:
      return "range";
    case WindowCriterion::kStableLabel:
      return "stable-label";
  }
  return "unknown";
}

std::optional<WindowCriterion> parse_criterion(std::string_view name) {
  for (auto c : {WindowCriterion::kBiasTrend, WindowCriterion::kRange,
                 WindowCriterion::kStableLabel}) {
    if (criterion_name(c) == name) return c;
  }
  return std::nullopt;
}

void ExitPolicy::validate() const {
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw std::invalid_argument("ExitPolicy: delta must lie in [0, 1]");
  }
  if (window < 2) throw std::invalid_argument("ExitPolicy: window must be >= 2");
  if (!(range_eps >= 0.0)) {
    throw std::invalid_argument("ExitPolicy: range_eps must be >= 0");
  }
}

std::string ExitPolicy::window_string() const {
  return window_enabled() ? std::to_string(window) : "inf";
}

std::string_view stage_name(ExitStage s) {
  switch (s) {
    case ExitStage::kNone:
      return "none";
    case ExitStage::kStage1:
      return "stage1";
    case ExitStage::kStage2:
      return "stage2";
    case ExitStage::kForced:
      return "forced";
  }
  return "unknown";
}

double puzzlement(std::span<const double> p) {
  if (p.size() < 2) {
    throw std::invalid_argument("puzzlement: need at least two classes");
  }
  double total = 0.0;
  double neg_entropy = 0.0;
  for (double v : p) {
    total += v;
    if (v > 0.0) neg_entropy += v * std::log(v);
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("puzzlement: probabilities do not sum to 1");
  }
  // Exactly uniform rows must hit the boundary value 1 despite rounding in
  // the entropy sum; the strict stage-1 test depends on it.
  if (std::all_of(p.begin(), p.end(), [&](double v) { return v == p[0]; })) {
    return 1.0;
  }
  const double value =
      neg_entropy / std::log(1.0 / static_cast<double>(p.size()));
  return std::clamp(value, 0.0, 1.0) + 0.0;
}

bool stage1_exit(std::span<const double> p, double delta) {
  return puzzlement(p) < delta;
}

bool stage2_exit(const LayerTrace& trace, const ExitPolicy& policy) {
  if (!policy.window_enabled() || trace.size() < policy.window) return false;
  const size_t begin = trace.size() - policy.window;
  const auto& probs = trace.probabilities;
  const auto& labels = trace.labels;

  switch (policy.criterion) {
    case WindowCriterion::kBiasTrend: {
      const size_t cls = labels[begin];
      for (size_t i = begin + 1; i < trace.size(); ++i) {
        if (labels[i] != cls) return false;
        if (probs[i][cls] < probs[i - 1][cls]) return false;
      }
      return true;
    }
    case WindowCriterion::kRange: {
      const size_t classes = probs[begin].size();
      for (size_t c = 0; c < classes; ++c) {
        double lo = probs[begin][c];
        double hi = lo;
        for (size_t i = begin + 1; i < trace.size(); ++i) {
          lo = std::min(lo, probs[i][c]);
          hi = std::max(hi, probs[i][c]);
        }
        if (!(hi - lo < policy.range_eps)) return false;
      }
      return true;
    }
    case WindowCriterion::kStableLabel:
      return std::all_of(labels.begin() + static_cast<std::ptrdiff_t>(begin),
                         labels.end(),
                         [&](size_t l) { return l == labels[begin]; });
  }
  return false;
}

ExitDecision cwb_decide(const LayerTrace& trace, const ExitPolicy& policy,
                        size_t layer, size_t depth) {
  if (trace.empty()) throw std::invalid_argument("cwb_decide: empty trace");
  if (stage1_exit(trace.last(), policy.delta)) {
    return {true, ExitStage::kStage1};
  }
  if (stage2_exit(trace, policy)) return {true, ExitStage::kStage2};
  if (layer >= depth) return {true, ExitStage::kForced};
  return {false, ExitStage::kNone};
}

}  // namespace elbert
