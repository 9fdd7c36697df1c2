#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "elbert/model/layer_trace.h"

namespace elbert {

// Second-stage window criteria. Each is evaluated over the trailing `window`
// classifier outputs.
enum class WindowCriterion {
  kBiasTrend,    // one argmax class whose probability never decreases
  kRange,        // every coordinate moves less than range_eps
  kStableLabel,  // the predicted label never changes
};

std::string_view criterion_name(WindowCriterion c);
// Accepts "bias-trend", "range", "stable-label".
std::optional<WindowCriterion> parse_criterion(std::string_view name);

struct ExitPolicy {
  static constexpr size_t kDefaultWindow = 8;
  // Disables the second stage.
  static constexpr size_t kNoWindow = std::numeric_limits<size_t>::max();

  double delta = 0.0;
  size_t window = kDefaultWindow;
  WindowCriterion criterion = WindowCriterion::kBiasTrend;
  double range_eps = 0.05;

  bool window_enabled() const { return window != kNoWindow; }
  // Throws std::invalid_argument unless 0 <= delta <= 1 and window >= 2.
  void validate() const;
  std::string window_string() const;
};

enum class ExitStage { kNone, kStage1, kStage2, kForced };

std::string_view stage_name(ExitStage s);

struct ExitDecision {
  bool exit = false;
  ExitStage stage = ExitStage::kNone;

  friend bool operator==(const ExitDecision&, const ExitDecision&) = default;
};

// Normalized entropy of p in [0, 1]: 0 for one-hot, 1 for uniform.
// Uses 0 log 0 = 0. Throws std::invalid_argument when p has fewer than two
// classes or does not sum to one within 1e-9.
double puzzlement(std::span<const double> p);

// Strict: puzzlement(p) < delta.
bool stage1_exit(std::span<const double> p, double delta);

// False until the trace holds at least `window` entries.
bool stage2_exit(const LayerTrace& trace, const ExitPolicy& policy);

// Stage 1 on the newest entry, then stage 2 on the window, then a forced exit
// once `layer` reaches `depth`.
ExitDecision cwb_decide(const LayerTrace& trace, const ExitPolicy& policy,
                        size_t layer, size_t depth);

}  // namespace elbert
