#include "elbert/model/config.h"

#include <stdexcept>

#include "elbert/model/layer_trace.h"
#include "elbert/numerics/ops.h"

namespace elbert {

void ModelConfig::validate() const {
  if (depth < 2) throw std::invalid_argument("ModelConfig: depth must be >= 2");
  if (hidden == 0 || heads == 0 || hidden % heads != 0) {
    throw std::invalid_argument(
        "ModelConfig: hidden must be a positive multiple of heads");
  }
  if (ffn == 0) throw std::invalid_argument("ModelConfig: ffn must be > 0");
  if (classes < 2) {
    throw std::invalid_argument("ModelConfig: classes must be >= 2");
  }
  if (max_seq_len < 2) {
    throw std::invalid_argument("ModelConfig: max_seq_len must be >= 2");
  }
  if (vocab <= kUnknownId) {
    throw std::invalid_argument("ModelConfig: vocab must hold reserved ids");
  }
}

std::string ModelConfig::to_string() const {
  return "depth=" + std::to_string(depth) + " hidden=" + std::to_string(hidden) +
         " heads=" + std::to_string(heads) + " ffn=" + std::to_string(ffn) +
         " vocab=" + std::to_string(vocab) +
         " max_seq_len=" + std::to_string(max_seq_len) +
         " classes=" + std::to_string(classes);
}

void LayerTrace::push(std::vector<double> p) {
  labels.push_back(argmax(p));
  probabilities.push_back(std::move(p));
}

}  // namespace elbert
