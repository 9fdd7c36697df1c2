#include "elbert/harness/tokenizer.h"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

namespace elbert {

namespace {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

}  // namespace

Vocabulary::Vocabulary() {
  add("[PAD]");
  add("[CLS]");
  add("[UNK]");
}

void Vocabulary::add(std::string token) {
  index_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts,
                             size_t max_size) {
  std::map<std::string, size_t> counts;
  for (const auto& t : texts) {
    for (auto& w : split_words(t)) ++counts[w];
  }
  std::vector<std::pair<std::string, size_t>> ranked(counts.begin(),
                                                     counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (auto& [word, count] : ranked) {
    if (v.size() >= max_size) break;
    if (v.index_.contains(word)) continue;
    v.add(word);
  }
  return v;
}

size_t Vocabulary::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnknownId : it->second;
}

TokenSequence Vocabulary::encode(std::string_view text, size_t max_len) const {
  if (max_len < 1) throw std::invalid_argument("encode: max_len must be >= 1");
  std::vector<size_t> ids{kClsId};
  for (const auto& w : split_words(text)) {
    if (ids.size() >= max_len) break;
    ids.push_back(id(w));
  }
  return TokenSequence::unpadded(std::move(ids));
}

std::vector<std::string> Vocabulary::token_strings(
    const TokenSequence& seq) const {
  std::vector<std::string> out;
  for (size_t i = 0; i < seq.length() && seq.mask[i] != 0; ++i) {
    out.push_back(seq.ids[i] < tokens_.size() ? tokens_[seq.ids[i]] : "[UNK]");
  }
  return out;
}

void Vocabulary::store(WeightFile& file) const {
  file.metadata.emplace_back("vocab.size", std::to_string(size()));
  for (size_t i = 0; i < tokens_.size(); ++i) {
    file.metadata.emplace_back("vocab." + std::to_string(i), tokens_[i]);
  }
}

Vocabulary Vocabulary::load(const WeightFile& file) {
  const std::string* size = file.find_metadata("vocab.size");
  if (size == nullptr) {
    throw std::runtime_error("checkpoint has no vocabulary");
  }
  const size_t n = std::stoul(*size);
  std::map<std::string, std::string> entries;
  for (const auto& [k, v] : file.metadata) {
    if (k.starts_with("vocab.")) entries[k] = v;
  }
  Vocabulary vocab;
  vocab.tokens_.clear();
  vocab.index_.clear();
  for (size_t i = 0; i < n; ++i) {
    const auto it = entries.find("vocab." + std::to_string(i));
    if (it == entries.end()) {
      throw std::runtime_error("vocabulary entry " + std::to_string(i) +
                               " missing");
    }
    vocab.add(it->second);
  }
  if (vocab.size() <= kUnknownId) {
    throw std::runtime_error("vocabulary lacks reserved tokens");
  }
  return vocab;
}

}  // namespace elbert
