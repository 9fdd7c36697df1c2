#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace elbert {

// Label convention for three-way sentiment: 0 neutral, 1 positive,
// 2 negative.
struct LabeledText {
  std::string text;
  size_t label = 0;

  friend bool operator==(const LabeledText&, const LabeledText&) = default;
};

// One record per line: <label>\t<text>, UTF-8, LF line endings.
// Throws std::runtime_error naming the 1-based line of the first bad record.
std::vector<LabeledText> parse_dataset(std::istream& in, size_t classes);
std::vector<LabeledText> load_dataset(const std::filesystem::path& path,
                                      size_t classes);
void write_dataset(std::ostream& out, const std::vector<LabeledText>& records);
void save_dataset(const std::filesystem::path& path,
                  const std::vector<LabeledText>& records);

struct SynthSpec {
  size_t keywords_per_class = 4;
  size_t noise_vocab = 200;
  size_t min_noise = 3;
  size_t max_noise = 10;
};

// Keyword token that marks class `label` ("c<label>k<index>").
std::string synth_keyword(size_t label, size_t index);

// Each text holds exactly one class keyword among noise words. Classes are
// balanced to within one and the output is a pure function of the seed.
std::vector<LabeledText> synth_dataset(uint64_t seed, size_t n, size_t classes,
                                       const SynthSpec& spec = {});

struct DatasetSplit {
  std::vector<LabeledText> train;
  std::vector<LabeledText> validation;
  std::vector<LabeledText> test;
};

// Seeded shuffle, then 60/20/20.
DatasetSplit split_dataset(std::vector<LabeledText> records, uint64_t seed);

}  // namespace elbert
