#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace elbert {

struct DifferentiableFunction {
  std::function<double(std::span<const double>)> value;
  // Reverse-mode gradient at the given point; same length as the point.
  std::function<std::vector<double>(std::span<const double>)> gradient;
};

struct GradCheckOptions {
  double step = 1e-5;
  // 0 checks every coordinate; otherwise a seeded sample of this many.
  size_t sampled_coordinates = 0;
  uint64_t seed = 0;
  // Coordinates that are always checked, in addition to the sample.
  std::vector<size_t> forced_coordinates;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  size_t worst_coordinate = 0;
  size_t checked = 0;
};

// Compares the reverse-mode gradient against central finite differences.
// Error per coordinate is |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
// Throws std::runtime_error if either gradient is non-finite.
GradCheckReport grad_check(const DifferentiableFunction& f,
                           std::span<const double> theta,
                           const GradCheckOptions& options = {});

}  // namespace elbert
