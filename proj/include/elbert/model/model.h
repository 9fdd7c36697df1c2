#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "elbert/exit_policy/exit_policy.h"
#include "elbert/model/layer_trace.h"
#include "elbert/model/parameters.h"
#include "elbert/numerics/matrix.h"
#include "elbert/numerics/tape.h"

namespace elbert {

// Token ids with [CLS] at position 0. mask[i] is 1 on real tokens and 0 on
// padding; real tokens always form a prefix.
struct TokenSequence {
  std::vector<size_t> ids;
  std::vector<uint8_t> mask;

  static TokenSequence unpadded(std::vector<size_t> ids);
  // Pads (or rejects if too long) to exactly `length` positions.
  TokenSequence padded_to(size_t length) const;

  size_t length() const { return ids.size(); }
  size_t real_length() const;
  // Throws std::invalid_argument on length/mask/vocab violations.
  void validate(const ModelConfig& config) const;
};

using HiddenState = Matrix;

// Token plus position embedding; padded rows are zero.
HiddenState embed(const TokenSequence& x, const Parameters& params);

struct EncoderOutput {
  HiddenState hidden;
  // One seq_len x seq_len matrix per head; empty unless requested.
  std::vector<Matrix> attention;
};

// One application of the shared post-LN encoder block to a single sequence.
// Only real-token rows are computed; padded rows of the result are zero.
EncoderOutput encoder_step(const HiddenState& h, std::span<const uint8_t> mask,
                           const Parameters& params,
                           bool keep_attention = false);

// The same block applied to `masks.size()` sequences stacked row-wise into a
// (n * seq_len) x hidden tensor. Rows of different sequences never interact,
// so every sequence's output is independent of its batch neighbours.
// `attention`, when non-null, receives per-slot per-head matrices.
HiddenState encoder_step_batched(const HiddenState& stacked, size_t seq_len,
                                 std::span<const std::vector<uint8_t>> masks,
                                 const Parameters& params,
                                 std::vector<std::vector<Matrix>>* attention =
                                     nullptr);

// softmax(h[CLS] * W + b) with the shared classifier.
std::vector<double> classify(const HiddenState& h, const Parameters& params);
std::vector<double> classify_row(std::span<const double> cls_row,
                                 const Parameters& params);

struct ForwardOptions {
  // Plain compression: run at most this many layers (0 = full depth).
  size_t depth_override = 0;
  bool record_attention = false;
};

struct ForwardResult {
  size_t prediction = 0;
  size_t exit_layer = 0;
  ExitStage stage = ExitStage::kNone;
  LayerTrace trace;
};

// Iterates the shared encoder, classifying after every layer. Without a
// policy, all layers run and the last layer predicts.
ForwardResult forward_with_trace(const TokenSequence& x,
                                 const Parameters& params,
                                 const std::optional<ExitPolicy>& policy,
                                 const ForwardOptions& options = {});

size_t effective_depth(const ModelConfig& config, size_t depth_override);

// Tape mirror of the parameters, bound once per loss evaluation.
struct TapeParameters {
  Tape::Var token_embedding, position_embedding;
  Tape::Var query, query_bias, key, key_bias, value, value_bias;
  Tape::Var output, output_bias;
  Tape::Var attention_norm_gain, attention_norm_bias;
  Tape::Var ffn_in, ffn_in_bias, ffn_out, ffn_out_bias;
  Tape::Var ffn_norm_gain, ffn_norm_bias;
  Tape::Var classifier, classifier_bias;
  Tape::Var exit_logits;
};

TapeParameters bind_parameters(Tape& tape, const Parameters& params);

// Full-depth differentiable forward of one unpadded sequence; returns the
// 1 x classes probability row of every layer.
std::vector<Tape::Var> forward_on_tape(Tape& tape, const TapeParameters& vars,
                                       const ModelConfig& config,
                                       const TokenSequence& x);

// Reads gradients of every bound parameter back into a Parameters-shaped
// accumulator (gradients add).
void accumulate_gradients(const Tape& tape, const TapeParameters& vars,
                          Parameters& into);

}  // namespace elbert
