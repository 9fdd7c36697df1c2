#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "elbert/model/model.h"
#include "elbert/model/weight_file.h"

namespace elbert {

// Whitespace vocabulary with reserved [PAD], [CLS] and [UNK] ids.
class Vocabulary {
 public:
  Vocabulary();

  // Most frequent tokens first (ties broken lexicographically), capped so
  // the vocabulary holds at most max_size ids including reserved ones.
  static Vocabulary build(const std::vector<std::string>& texts, size_t max_size);

  size_t size() const { return tokens_.size(); }
  size_t id(std::string_view token) const;  // kUnknownId when absent
  const std::string& token(size_t id) const { return tokens_.at(id); }

  // [CLS] followed by the text's tokens, truncated to max_len positions.
  TokenSequence encode(std::string_view text, size_t max_len) const;
  std::vector<std::string> token_strings(const TokenSequence& seq) const;

  // Stored as "vocab.<id>=<token>" metadata entries.
  void store(WeightFile& file) const;
  static Vocabulary load(const WeightFile& file);

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace elbert
