#pragma once

#include <cstddef>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "elbert/harness/dataset.h"

namespace elbert {

// Text cleanup applied before tokenization:
//   1. lowercase (ASCII)
//   2. drop URL tokens (http://, https://, www.)
//   3. strip punctuation and symbol characters
//   4. drop stopwords and blocked (non-financial) terms
//   5. collapse whitespace
// Applying it twice gives the same result as applying it once.
class Preprocessor {
 public:
  Preprocessor();  // built-in English stopword list, no blocked terms
  Preprocessor(std::set<std::string> stopwords,
               std::set<std::string> blocked_terms = {});

  // One word per line; blank lines and lines starting with '#' are skipped.
  static std::set<std::string> read_word_list(const std::filesystem::path& path);
  static const std::set<std::string>& default_stopwords();

  std::string operator()(std::string_view text) const;

  struct Report {
    std::vector<LabeledText> kept;
    size_t dropped = 0;  // records whose text became empty
  };
  Report apply(const std::vector<LabeledText>& records) const;

 private:
  std::set<std::string> stopwords_;
  std::set<std::string> blocked_;
};

}  // namespace elbert
