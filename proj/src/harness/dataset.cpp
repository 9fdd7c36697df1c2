#include "elbert/harness/dataset.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace elbert {

std::vector<LabeledText> parse_dataset(std::istream& in, size_t classes) {
  std::vector<LabeledText> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto fail = [&](const std::string& why) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": " +
                               why);
    };
    const auto tab = line.find('\t');
    if (tab == std::string::npos) fail("expected <label>\\t<text>");
    const std::string_view label_text(line.data(), tab);
    size_t label = 0;
    const auto [ptr, ec] = std::from_chars(
        label_text.data(), label_text.data() + label_text.size(), label);
    if (ec != std::errc() || ptr != label_text.data() + label_text.size() ||
        label_text.empty()) {
      fail("label '" + std::string(label_text) + "' is not an integer");
    }
    if (label >= classes) {
      fail("label " + std::to_string(label) + " >= class count " +
           std::to_string(classes));
    }
    records.push_back({line.substr(tab + 1), label});
  }
  return records;
}

std::vector<LabeledText> load_dataset(const std::filesystem::path& path,
                                      size_t classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open dataset");
  try {
    return parse_dataset(in, classes);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_dataset(std::ostream& out, const std::vector<LabeledText>& records) {
  for (const auto& r : records) out << r.label << '\t' << r.text << '\n';
}

void save_dataset(const std::filesystem::path& path,
                  const std::vector<LabeledText>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot write dataset");
  write_dataset(out, records);
}

std::string synth_keyword(size_t label, size_t index) {
  return "c" + std::to_string(label) + "k" + std::to_string(index);
}

std::vector<LabeledText> synth_dataset(uint64_t seed, size_t n, size_t classes,
                                       const SynthSpec& spec) {
  if (n == 0) throw std::invalid_argument("synth_dataset: n must be >= 1");
  if (classes < 2) throw std::invalid_argument("synth_dataset: classes < 2");
  if (spec.keywords_per_class == 0 || spec.noise_vocab == 0 ||
      spec.min_noise > spec.max_noise) {
    throw std::invalid_argument("synth_dataset: bad spec");
  }
  std::mt19937_64 rng(seed);
  std::vector<size_t> labels(n);
  for (size_t i = 0; i < n; ++i) labels[i] = i % classes;
  std::shuffle(labels.begin(), labels.end(), rng);

  std::uniform_int_distribution<size_t> noise_len(spec.min_noise, spec.max_noise);
  std::uniform_int_distribution<size_t> noise_word(0, spec.noise_vocab - 1);
  std::uniform_int_distribution<size_t> keyword(0, spec.keywords_per_class - 1);

  std::vector<LabeledText> out;
  out.reserve(n);
  for (size_t label : labels) {
    std::vector<std::string> words;
    const size_t count = noise_len(rng);
    for (size_t i = 0; i < count; ++i) {
      words.push_back("w" + std::to_string(noise_word(rng)));
    }
    std::uniform_int_distribution<size_t> slot(0, words.size());
    const size_t at = slot(rng);
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(at),
                 synth_keyword(label, keyword(rng)));
    std::string text;
    for (const auto& w : words) {
      if (!text.empty()) text += ' ';
      text += w;
    }
    out.push_back({std::move(text), label});
  }
  return out;
}

DatasetSplit split_dataset(std::vector<LabeledText> records, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::shuffle(records.begin(), records.end(), rng);
  const size_t n = records.size();
  const size_t train_end = n * 6 / 10;
  const size_t val_end = train_end + n * 2 / 10;
  DatasetSplit split;
  auto take = [&](size_t a, size_t b) {
    return std::vector<LabeledText>(
        std::make_move_iterator(records.begin() + static_cast<std::ptrdiff_t>(a)),
        std::make_move_iterator(records.begin() + static_cast<std::ptrdiff_t>(b)));
  };
  split.train = take(0, train_end);
  split.validation = take(train_end, val_end);
  split.test = take(val_end, n);
  return split;
}

}  // namespace elbert
