#include "elbert/numerics/grad_check.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace elbert {

GradCheckReport grad_check(const DifferentiableFunction& f,
                           std::span<const double> theta,
                           const GradCheckOptions& options) {
  const std::vector<double> analytic = f.gradient(theta);
  if (analytic.size() != theta.size()) {
    throw std::invalid_argument("grad_check: gradient length mismatch");
  }

  std::vector<size_t> coords;
  if (options.sampled_coordinates == 0 ||
      options.sampled_coordinates >= theta.size()) {
    coords.resize(theta.size());
    std::iota(coords.begin(), coords.end(), size_t{0});
  } else {
    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<size_t> pick(0, theta.size() - 1);
    for (size_t i = 0; i < options.sampled_coordinates; ++i) {
      coords.push_back(pick(rng));
    }
  }
  for (size_t c : options.forced_coordinates) {
    if (c >= theta.size()) {
      throw std::invalid_argument("grad_check: forced coordinate out of range");
    }
    coords.push_back(c);
  }
  std::sort(coords.begin(), coords.end());
  coords.erase(std::unique(coords.begin(), coords.end()), coords.end());

  std::vector<double> point(theta.begin(), theta.end());
  GradCheckReport report;
  for (size_t i : coords) {
    const double original = point[i];
    point[i] = original + options.step;
    const double up = f.value(point);
    point[i] = original - options.step;
    const double down = f.value(point);
    point[i] = original;

    const double numeric = (up - down) / (2.0 * options.step);
    const double ad = analytic[i];
    if (!std::isfinite(ad) || !std::isfinite(numeric)) {
      throw std::runtime_error("grad_check: non-finite gradient at coordinate " +
                               std::to_string(i));
    }
    const double err = std::abs(ad - numeric) /
                       std::max({1.0, std::abs(ad), std::abs(numeric)});
    if (err > report.max_relative_error || report.checked == 0) {
      report.max_relative_error = std::max(report.max_relative_error, err);
      if (err >= report.max_relative_error) report.worst_coordinate = i;
    }
    ++report.checked;
  }
  return report;
}

}  // namespace elbert
