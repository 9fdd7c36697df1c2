#include "elbert/harness/attention_trace.h"

#include <stdexcept>

#include "elbert/scheduler/csv_export.h"

namespace elbert {

Matrix export_attention_trace(const Parameters& params, const TokenSequence& x) {
  const size_t len = x.real_length();
  const TokenSequence unpadded = x.padded_to(len);
  ForwardOptions options;
  options.record_attention = true;
  const ForwardResult r = forward_with_trace(unpadded, params, std::nullopt, options);

  const auto& layers = r.trace.cls_attention;
  Matrix out(layers.size(), len);
  std::vector<double> running(len, 0.0);
  for (size_t i = 0; i < layers.size(); ++i) {
    for (size_t j = 0; j < len; ++j) {
      running[j] += layers[i][j];
      out(i, j) = running[j] / static_cast<double>(i + 1);
    }
  }
  return out;
}

void write_attention_csv(std::ostream& out, std::span<const std::string> tokens,
                         const Matrix& trace) {
  if (tokens.size() != trace.cols()) {
    throw std::invalid_argument("write_attention_csv: header/column mismatch");
  }
  for (size_t j = 0; j < tokens.size(); ++j) {
    if (j > 0) out << ',';
    out << tokens[j];
  }
  out << '\n';
  for (size_t i = 0; i < trace.rows(); ++i) {
    for (size_t j = 0; j < trace.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(trace(i, j));
    }
    out << '\n';
  }
}

}  // namespace elbert
