#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "elbert/model/layer_trace.h"
#include "elbert/model/model.h"
#include "elbert/model/parameters.h"
#include "elbert/numerics/tape.h"

namespace elbert {

struct Example {
  TokenSequence tokens;
  size_t label = 0;
};

// Cross-entropy of every layer against the ground-truth label.
// The trace must hold exactly `depth` layers.
std::vector<double> layer_losses(const LayerTrace& trace, size_t label,
                                 size_t depth);

// w_i = sigmoid(t_i) for i < d, and w_d = d - sum of the others, so the
// weights always sum to d. Returns d = exit_logits.size() + 1 weights.
std::vector<double> exit_weights(std::span<const double> exit_logits);

double total_loss(const LayerTrace& trace, size_t label,
                  std::span<const double> exit_logits);

// Differentiable form of total_loss over per-layer probability rows;
// gradients reach both the model (through probs) and the exit logits.
Tape::Var total_loss_on_tape(Tape& tape, Tape::Var exit_logits,
                             std::span<const Tape::Var> probs, size_t label);

// Runs forward + backward for one example and adds its gradient into
// `gradient` (shaped like params). Returns the example's total loss.
double accumulate_example_gradient(const Parameters& params,
                                   const Example& example,
                                   Parameters& gradient);

}  // namespace elbert
