#include "elbert/harness/experiment.h"

#include <fstream>
#include <stdexcept>

namespace elbert {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

size_t parse_count(const std::string& key, const std::string& value) {
  size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size() || value.empty() || value[0] == '-') {
    throw std::invalid_argument("run config: " + key + " expects an integer, got '" +
                                value + "'");
  }
  return static_cast<size_t>(v);
}

double parse_real(const std::string& key, const std::string& value) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != value.size() || value.empty()) {
    throw std::invalid_argument("run config: " + key + " expects a number, got '" +
                                value + "'");
  }
  return v;
}

}  // namespace

std::map<std::string, std::string> read_run_config(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open run config");
  std::map<std::string, std::string> entries;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected key = value");
    }
    entries[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return entries;
}

void apply_run_config(const std::map<std::string, std::string>& entries,
                      ModelConfig& model, TrainConfig& train,
                      uint64_t& init_seed) {
  for (const auto& [key, value] : entries) {
    if (key == "depth") {
      model.depth = parse_count(key, value);
    } else if (key == "hidden") {
      model.hidden = parse_count(key, value);
    } else if (key == "heads") {
      model.heads = parse_count(key, value);
    } else if (key == "ffn") {
      model.ffn = parse_count(key, value);
    } else if (key == "vocab") {
      model.vocab = parse_count(key, value);
    } else if (key == "max_seq_len") {
      model.max_seq_len = parse_count(key, value);
    } else if (key == "classes") {
      model.classes = parse_count(key, value);
    } else if (key == "learning_rate") {
      train.learning_rate = parse_real(key, value);
    } else if (key == "batch_size") {
      train.batch_size = parse_count(key, value);
    } else if (key == "epochs") {
      train.epochs = parse_count(key, value);
    } else if (key == "beta1") {
      train.beta1 = parse_real(key, value);
    } else if (key == "beta2") {
      train.beta2 = parse_real(key, value);
    } else if (key == "epsilon") {
      train.epsilon = parse_real(key, value);
    } else if (key == "seed") {
      train.seed = parse_count(key, value);
    } else if (key == "stop_at_accuracy") {
      train.stop_at_accuracy = parse_real(key, value);
    } else if (key == "init_seed") {
      init_seed = parse_count(key, value);
    } else {
      throw std::invalid_argument("run config: unknown key '" + key + "'");
    }
  }
  model.validate();
  train.validate();
}

std::vector<Example> to_examples(const std::vector<LabeledText>& records,
                                 const Vocabulary& vocab, size_t max_seq_len) {
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back({vocab.encode(r.text, max_seq_len), r.label});
  }
  return out;
}

std::vector<StreamItem> to_stream(const std::vector<LabeledText>& records,
                                  const Vocabulary& vocab, size_t max_seq_len) {
  std::vector<StreamItem> out;
  out.reserve(records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    out.push_back({i, vocab.encode(records[i].text, max_seq_len), records[i].label});
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  WeightFile file = to_checkpoint(ckpt.params, ckpt.optimizer);
  ckpt.vocab.store(file);
  write_weight_file(path, file);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const WeightFile file = read_weight_file(path);
  Checkpoint ckpt{parameters_from(file), Vocabulary::load(file), {}};
  ckpt.optimizer = optimizer_from(file, ckpt.params);
  if (ckpt.vocab.size() > ckpt.params.config.vocab) {
    throw std::runtime_error(path.string() +
                             ": vocabulary larger than the embedding table");
  }
  return ckpt;
}

}  // namespace elbert
