#include "elbert/model/parameters.h"

#include <random>
#include <stdexcept>

namespace elbert {

namespace {

constexpr double kInitStd = 0.02;

template <typename Self, typename Entry>
std::vector<Entry> list_tensors(Self& p) {
  auto& e = p.encoder;
  return {
      {"token_embedding", &p.token_embedding},
      {"position_embedding", &p.position_embedding},
      {"encoder.query", &e.query},
      {"encoder.query_bias", &e.query_bias},
      {"encoder.key", &e.key},
      {"encoder.key_bias", &e.key_bias},
      {"encoder.value", &e.value},
      {"encoder.value_bias", &e.value_bias},
      {"encoder.output", &e.output},
      {"encoder.output_bias", &e.output_bias},
      {"encoder.attention_norm_gain", &e.attention_norm_gain},
      {"encoder.attention_norm_bias", &e.attention_norm_bias},
      {"encoder.ffn_in", &e.ffn_in},
      {"encoder.ffn_in_bias", &e.ffn_in_bias},
      {"encoder.ffn_out", &e.ffn_out},
      {"encoder.ffn_out_bias", &e.ffn_out_bias},
      {"encoder.ffn_norm_gain", &e.ffn_norm_gain},
      {"encoder.ffn_norm_bias", &e.ffn_norm_bias},
      {"classifier", &p.classifier},
      {"classifier_bias", &p.classifier_bias},
      {"exit_logits", &p.exit_logits},
  };
}

void fill_normal(Matrix& m, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, kInitStd);
  for (double& v : m.data()) v = dist(rng);
}

}  // namespace

Parameters Parameters::zeros(const ModelConfig& config) {
  config.validate();
  const size_t h = config.hidden;
  Parameters p;
  p.config = config;
  p.token_embedding = Matrix(config.vocab, h);
  p.position_embedding = Matrix(config.max_seq_len, h);
  auto& e = p.encoder;
  e.query = Matrix(h, h);
  e.key = Matrix(h, h);
  e.value = Matrix(h, h);
  e.output = Matrix(h, h);
  e.query_bias = Matrix(1, h);
  e.key_bias = Matrix(1, h);
  e.value_bias = Matrix(1, h);
  e.output_bias = Matrix(1, h);
  e.attention_norm_gain = Matrix(1, h, 1.0);
  e.attention_norm_bias = Matrix(1, h);
  e.ffn_in = Matrix(h, config.ffn);
  e.ffn_in_bias = Matrix(1, config.ffn);
  e.ffn_out = Matrix(config.ffn, h);
  e.ffn_out_bias = Matrix(1, h);
  e.ffn_norm_gain = Matrix(1, h, 1.0);
  e.ffn_norm_bias = Matrix(1, h);
  p.classifier = Matrix(h, config.classes);
  p.classifier_bias = Matrix(1, config.classes);
  p.exit_logits = Matrix(1, config.depth - 1, kExitLogitInit);
  return p;
}

Parameters Parameters::initialize(const ModelConfig& config, uint64_t seed) {
  Parameters p = zeros(config);
  std::mt19937_64 rng(seed);
  auto& e = p.encoder;
  for (Matrix* m : {&p.token_embedding, &p.position_embedding, &e.query, &e.key,
                    &e.value, &e.output, &e.ffn_in, &e.ffn_out,
                    &p.classifier}) {
    fill_normal(*m, rng);
  }
  return p;
}

std::vector<Parameters::Named> Parameters::tensors() {
  return list_tensors<Parameters, Named>(*this);
}

std::vector<Parameters::ConstNamed> Parameters::tensors() const {
  return list_tensors<const Parameters, ConstNamed>(*this);
}

size_t Parameters::count() const {
  size_t n = 0;
  for (const auto& t : tensors()) n += t.tensor->size();
  return n;
}

size_t Parameters::shared_count() const { return count() - exit_logits.size(); }

std::vector<double> Parameters::flatten() const {
  std::vector<double> out;
  out.reserve(count());
  for (const auto& t : tensors()) {
    auto d = t.tensor->data();
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

void Parameters::unflatten(std::span<const double> values) {
  if (values.size() != count()) {
    throw std::invalid_argument("Parameters::unflatten: expected " +
                                std::to_string(count()) + " values, got " +
                                std::to_string(values.size()));
  }
  size_t offset = 0;
  for (auto& t : tensors()) {
    auto d = t.tensor->data();
    std::copy(values.begin() + offset, values.begin() + offset + d.size(),
              d.begin());
    offset += d.size();
  }
}

void Parameters::validate() const {
  config.validate();
  const Parameters reference = zeros(config);
  const auto expected = reference.tensors();
  const auto actual = tensors();
  for (size_t i = 0; i < expected.size(); ++i) {
    if (!expected[i].tensor->same_shape(*actual[i].tensor)) {
      throw std::invalid_argument("Parameters: tensor " + actual[i].name +
                                  " has shape " +
                                  actual[i].tensor->shape_string() +
                                  ", expected " +
                                  expected[i].tensor->shape_string());
    }
  }
}

}  // namespace elbert
