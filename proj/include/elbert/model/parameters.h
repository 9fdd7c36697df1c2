#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "elbert/model/config.h"
#include "elbert/numerics/matrix.h"

namespace elbert {

// The one encoder block. Every depth iteration reuses these weights.
struct EncoderWeights {
  Matrix query, query_bias;
  Matrix key, key_bias;
  Matrix value, value_bias;
  Matrix output, output_bias;
  Matrix attention_norm_gain, attention_norm_bias;
  Matrix ffn_in, ffn_in_bias;
  Matrix ffn_out, ffn_out_bias;
  Matrix ffn_norm_gain, ffn_norm_bias;

  friend bool operator==(const EncoderWeights&, const EncoderWeights&) = default;
};

inline constexpr double kExitLogitInit = 4.0;

struct Parameters {
  ModelConfig config;
  Matrix token_embedding;     // vocab x hidden
  Matrix position_embedding;  // max_seq_len x hidden
  EncoderWeights encoder;
  Matrix classifier;          // hidden x classes, shared by every exit
  Matrix classifier_bias;     // 1 x classes
  Matrix exit_logits;         // 1 x (depth - 1), the t_i of the exit weights

  // Correctly shaped; norm gains 1, exit logits kExitLogitInit, rest 0.
  static Parameters zeros(const ModelConfig& config);
  // N(0, 0.02) weights, zero biases, unit norm gains.
  static Parameters initialize(const ModelConfig& config, uint64_t seed);

  struct Named {
    std::string name;
    Matrix* tensor;
  };
  struct ConstNamed {
    std::string name;
    const Matrix* tensor;
  };
  // Fixed manifest order; serialization and flattening both follow it.
  std::vector<Named> tensors();
  std::vector<ConstNamed> tensors() const;

  size_t count() const;
  // Everything except exit_logits; independent of depth.
  size_t shared_count() const;
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> values);

  // Shape check against config; throws std::invalid_argument.
  void validate() const;

  friend bool operator==(const Parameters&, const Parameters&) = default;
};

}  // namespace elbert
