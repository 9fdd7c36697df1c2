#include "elbert/model/weight_file.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace elbert {

namespace {

constexpr const char* kMagic = "elbert-weights 1";
constexpr const char* kEndHeader = "end_header";

void put_le(std::string& out, double value) {
  const auto bits = std::bit_cast<uint64_t>(value);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
  }
}

double get_le(const unsigned char* in) {
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(in[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& why) {
  throw std::runtime_error(path.string() + ": " + why);
}

struct ConfigField {
  const char* key;
  size_t ModelConfig::*field;
};

constexpr ConfigField kConfigFields[] = {
    {"config.depth", &ModelConfig::depth},
    {"config.hidden", &ModelConfig::hidden},
    {"config.heads", &ModelConfig::heads},
    {"config.ffn", &ModelConfig::ffn},
    {"config.vocab", &ModelConfig::vocab},
    {"config.max_seq_len", &ModelConfig::max_seq_len},
    {"config.classes", &ModelConfig::classes},
};

}  // namespace

const std::string* WeightFile::find_metadata(const std::string& key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return &v;
  }
  return nullptr;
}

const Matrix* WeightFile::find_tensor(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t.value;
  }
  return nullptr;
}

void write_weight_file(const std::filesystem::path& path,
                       const WeightFile& file) {
  std::string header = std::string(kMagic) + "\n";
  for (const auto& [key, value] : file.metadata) {
    if (key.find_first_of("=\n") != std::string::npos ||
        value.find('\n') != std::string::npos) {
      throw std::invalid_argument("weight file: bad metadata entry " + key);
    }
    header += key + "=" + value + "\n";
  }
  std::string blob;
  for (const auto& t : file.tensors) {
    if (t.name.find_first_of(" \n") != std::string::npos) {
      throw std::invalid_argument("weight file: bad tensor name " + t.name);
    }
    header += "tensor " + t.name + " " + std::to_string(t.value.rows()) + " " +
              std::to_string(t.value.cols()) + " " +
              std::to_string(blob.size()) + "\n";
    for (double v : t.value.data()) put_le(blob, v);
  }
  header += std::string(kEndHeader) + "\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(path, "cannot open for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) fail(path, "write failed");
}

WeightFile read_weight_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");
  std::string line;
  if (!std::getline(in, line) || line != kMagic) fail(path, "bad magic line");

  struct Entry {
    std::string name;
    size_t rows, cols, offset;
  };
  WeightFile file;
  std::vector<Entry> manifest;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == kEndHeader) {
      ended = true;
      break;
    }
    if (line.rfind("tensor ", 0) == 0) {
      std::istringstream fields(line.substr(7));
      Entry e;
      if (!(fields >> e.name >> e.rows >> e.cols >> e.offset)) {
        fail(path, "malformed tensor line: " + line);
      }
      manifest.push_back(e);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(path, "malformed header line: " + line);
    file.metadata.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  if (!ended) fail(path, "missing end_header");

  const std::string blob((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  size_t expected = 0;
  for (const auto& e : manifest) {
    if (e.offset != expected) fail(path, "tensor " + e.name + " offset mismatch");
    expected += e.rows * e.cols * 8;
  }
  if (blob.size() != expected) {
    fail(path, "blob holds " + std::to_string(blob.size()) + " bytes, manifest " +
                   std::to_string(expected));
  }
  const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
  for (const auto& e : manifest) {
    std::vector<double> data(e.rows * e.cols);
    for (size_t i = 0; i < data.size(); ++i) {
      data[i] = get_le(bytes + e.offset + 8 * i);
    }
    file.tensors.push_back({e.name, Matrix(e.rows, e.cols, std::move(data))});
  }
  return file;
}

WeightFile to_weight_file(const Parameters& params) {
  WeightFile file;
  for (const auto& f : kConfigFields) {
    file.metadata.emplace_back(f.key, std::to_string(params.config.*f.field));
  }
  for (const auto& t : params.tensors()) {
    file.tensors.push_back({t.name, *t.tensor});
  }
  return file;
}

Parameters parameters_from(const WeightFile& file) {
  ModelConfig config;
  for (const auto& f : kConfigFields) {
    const std::string* v = file.find_metadata(f.key);
    if (v == nullptr) {
      throw std::runtime_error(std::string("weight file: missing ") + f.key);
    }
    config.*f.field = std::stoul(*v);
  }
  Parameters params = Parameters::zeros(config);
  for (auto& t : params.tensors()) {
    const Matrix* stored = file.find_tensor(t.name);
    if (stored == nullptr) {
      throw std::runtime_error("weight file: missing tensor " + t.name);
    }
    if (!stored->same_shape(*t.tensor)) {
      throw std::runtime_error("weight file: tensor " + t.name + " has shape " +
                               stored->shape_string() + ", expected " +
                               t.tensor->shape_string());
    }
    *t.tensor = *stored;
  }
  return params;
}

void save_parameters(const std::filesystem::path& path,
                     const Parameters& params) {
  write_weight_file(path, to_weight_file(params));
}

Parameters load_parameters(const std::filesystem::path& path) {
  return parameters_from(read_weight_file(path));
}

}  // namespace elbert
