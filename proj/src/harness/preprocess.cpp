#include "elbert/harness/preprocess.h"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace elbert {

namespace {

bool is_url(std::string_view token) {
  return token.starts_with("http://") || token.starts_with("https://") ||
         token.starts_with("www.");
}

// Bytes >= 0x80 belong to multi-byte UTF-8 letters and are kept.
bool keep_char(unsigned char c) {
  return c >= 0x80 || std::isalnum(c) != 0;
}

}  // namespace

Preprocessor::Preprocessor() : Preprocessor(default_stopwords()) {}

Preprocessor::Preprocessor(std::set<std::string> stopwords,
                           std::set<std::string> blocked_terms)
    : stopwords_(std::move(stopwords)), blocked_(std::move(blocked_terms)) {}

const std::set<std::string>& Preprocessor::default_stopwords() {
  static const std::set<std::string> words = {
      "a",    "an",   "and",  "are",   "as",   "at",    "be",   "by",
      "for",  "from", "has",  "have",  "in",   "is",    "it",   "its",
      "of",   "on",   "or",   "that",  "the",  "this",  "to",   "was",
      "were", "will", "with", "which", "been", "their", "they", "than"};
  return words;
}

std::set<std::string> Preprocessor::read_word_list(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open word list");
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word) || word.starts_with('#')) continue;
    for (char& c : word) {
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    words.insert(word);
  }
  return words;
}

std::string Preprocessor::operator()(std::string_view text) const {
  std::string out;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() &&
           std::isspace(static_cast<unsigned char>(text[i])) != 0) {
      ++i;
    }
    const size_t start = i;
    while (i < text.size() &&
           std::isspace(static_cast<unsigned char>(text[i])) == 0) {
      ++i;
    }
    if (start == i) break;

    std::string token(text.substr(start, i - start));
    for (char& c : token) {
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (is_url(token)) continue;
    std::string cleaned;
    for (char c : token) {
      if (keep_char(static_cast<unsigned char>(c))) cleaned.push_back(c);
    }
    if (cleaned.empty() || stopwords_.contains(cleaned) ||
        blocked_.contains(cleaned)) {
      continue;
    }
    if (!out.empty()) out.push_back(' ');
    out += cleaned;
  }
  return out;
}

Preprocessor::Report Preprocessor::apply(
    const std::vector<LabeledText>& records) const {
  Report report;
  for (const auto& r : records) {
    std::string text = (*this)(r.text);
    if (text.empty()) {
      ++report.dropped;
      continue;
    }
    report.kept.push_back({std::move(text), r.label});
  }
  return report;
}

}  // namespace elbert
