#pragma once

#include <cstddef>
#include <string>

namespace elbert {

struct ModelConfig {
  size_t depth = 12;        // number of shared-encoder iterations
  size_t hidden = 64;
  size_t heads = 4;
  size_t ffn = 256;
  size_t vocab = 512;
  size_t max_seq_len = 32;  // includes the [CLS] slot
  size_t classes = 3;

  size_t head_dim() const { return hidden / heads; }

  // Throws std::invalid_argument describing the first violated constraint.
  void validate() const;
  std::string to_string() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Reserved token ids shared by the tokenizer and the model.
inline constexpr size_t kPadId = 0;
inline constexpr size_t kClsId = 1;
inline constexpr size_t kUnknownId = 2;

}  // namespace elbert
