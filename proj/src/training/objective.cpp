#include "elbert/training/objective.h"

#include <optional>
#include <stdexcept>
#include <string>

#include "elbert/numerics/ops.h"

namespace elbert {

std::vector<double> layer_losses(const LayerTrace& trace, size_t label,
                                 size_t depth) {
  if (trace.size() != depth) {
    throw std::invalid_argument("layer_losses: trace has " +
                                std::to_string(trace.size()) +
                                " layers, expected " + std::to_string(depth));
  }
  std::vector<double> losses;
  losses.reserve(depth);
  for (const auto& p : trace.probabilities) {
    losses.push_back(cross_entropy(p, label));
  }
  return losses;
}

std::vector<double> exit_weights(std::span<const double> exit_logits) {
  const size_t depth = exit_logits.size() + 1;
  std::vector<double> w;
  w.reserve(depth);
  double partial = 0.0;
  for (double t : exit_logits) {
    w.push_back(sigmoid(t));
    partial += w.back();
  }
  w.push_back(static_cast<double>(depth) - partial);
  return w;
}

double total_loss(const LayerTrace& trace, size_t label,
                  std::span<const double> exit_logits) {
  const auto w = exit_weights(exit_logits);
  const auto losses = layer_losses(trace, label, w.size());
  double total = 0.0;
  for (size_t i = 0; i < w.size(); ++i) total += w[i] * losses[i];
  return total;
}

Tape::Var total_loss_on_tape(Tape& tape, Tape::Var exit_logits,
                             std::span<const Tape::Var> probs, size_t label) {
  const size_t depth = tape.value(exit_logits).cols() + 1;
  if (probs.size() != depth) {
    throw std::invalid_argument("total_loss_on_tape: depth mismatch");
  }
  const auto gates = tape.sigmoid(exit_logits);
  std::optional<Tape::Var> total;
  for (size_t i = 0; i + 1 < depth; ++i) {
    const auto term = tape.mul(tape.element(gates, 0, i),
                               tape.cross_entropy(probs[i], label));
    total = total ? tape.add(*total, term) : term;
  }
  const auto last_weight =
      tape.affine(tape.sum(gates), -1.0, static_cast<double>(depth));
  const auto last =
      tape.mul(last_weight, tape.cross_entropy(probs[depth - 1], label));
  return tape.add(*total, last);
}

double accumulate_example_gradient(const Parameters& params,
                                   const Example& example,
                                   Parameters& gradient) {
  if (example.label >= params.config.classes) {
    throw std::invalid_argument("label " + std::to_string(example.label) +
                                " out of range");
  }
  Tape tape;
  const TapeParameters vars = bind_parameters(tape, params);
  const auto probs = forward_on_tape(tape, vars, params.config, example.tokens);
  const auto loss = total_loss_on_tape(tape, vars.exit_logits, probs,
                                       example.label);
  tape.backward(loss);
  accumulate_gradients(tape, vars, gradient);
  return tape.value(loss)(0, 0);
}

}  // namespace elbert
