#pragma once

#include <cstddef>
#include <vector>

namespace elbert {

// Classifier outputs p_1..p_k of one sample, one entry per executed layer.
struct LayerTrace {
  std::vector<std::vector<double>> probabilities;
  std::vector<size_t> labels;
  // Head-averaged attention row of [CLS], only filled when requested.
  std::vector<std::vector<double>> cls_attention;

  size_t size() const { return probabilities.size(); }
  bool empty() const { return probabilities.empty(); }
  const std::vector<double>& last() const { return probabilities.back(); }

  // Appends p and its argmax (lowest index on ties).
  void push(std::vector<double> p);
};

}  // namespace elbert
