#include "elbert/model/model.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "elbert/numerics/ops.h"

namespace elbert {

namespace {

std::vector<Tape::Var> manifest_order(const TapeParameters& v) {
  return {v.token_embedding, v.position_embedding, v.query, v.query_bias,
          v.key, v.key_bias, v.value, v.value_bias, v.output, v.output_bias,
          v.attention_norm_gain, v.attention_norm_bias, v.ffn_in, v.ffn_in_bias,
          v.ffn_out, v.ffn_out_bias, v.ffn_norm_gain, v.ffn_norm_bias,
          v.classifier, v.classifier_bias, v.exit_logits};
}

Matrix affine_rows(const Matrix& x, const Matrix& weight, const Matrix& bias) {
  Matrix out = matmul(x, weight);
  add_row_inplace(out, bias);
  return out;
}

void add_inplace(Matrix& dst, const Matrix& src) {
  auto d = dst.data();
  auto s = src.data();
  for (size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

TokenSequence TokenSequence::unpadded(std::vector<size_t> ids) {
  TokenSequence s;
  s.mask.assign(ids.size(), 1);
  s.ids = std::move(ids);
  return s;
}

TokenSequence TokenSequence::padded_to(size_t length) const {
  if (real_length() > length) {
    throw std::invalid_argument("TokenSequence: " +
                                std::to_string(real_length()) +
                                " tokens do not fit in " +
                                std::to_string(length));
  }
  TokenSequence s;
  const size_t n = real_length();
  s.ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n));
  s.mask.assign(n, 1);
  s.ids.resize(length, kPadId);
  s.mask.resize(length, 0);
  return s;
}

size_t TokenSequence::real_length() const {
  return static_cast<size_t>(std::count(mask.begin(), mask.end(), uint8_t{1}));
}

void TokenSequence::validate(const ModelConfig& config) const {
  if (ids.empty()) throw std::invalid_argument("TokenSequence: empty");
  if (ids.size() != mask.size()) {
    throw std::invalid_argument("TokenSequence: ids/mask length mismatch");
  }
  if (ids.size() > config.max_seq_len) {
    throw std::invalid_argument("TokenSequence: length " +
                                std::to_string(ids.size()) + " exceeds " +
                                std::to_string(config.max_seq_len));
  }
  if (mask[0] == 0) {
    throw std::invalid_argument("TokenSequence: [CLS] position is masked");
  }
  bool seen_pad = false;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (mask[i] > 1) throw std::invalid_argument("TokenSequence: bad mask");
    if (mask[i] == 0) {
      seen_pad = true;
    } else if (seen_pad) {
      throw std::invalid_argument("TokenSequence: real tokens after padding");
    }
    if (mask[i] == 1 && ids[i] >= config.vocab) {
      throw std::invalid_argument("TokenSequence: token id " +
                                  std::to_string(ids[i]) +
                                  " out of vocabulary at position " +
                                  std::to_string(i));
    }
  }
}

HiddenState embed(const TokenSequence& x, const Parameters& params) {
  x.validate(params.config);
  const size_t h = params.config.hidden;
  HiddenState out(x.length(), h);
  for (size_t i = 0; i < x.length(); ++i) {
    if (x.mask[i] == 0) continue;
    auto tok = params.token_embedding.row(x.ids[i]);
    auto pos = params.position_embedding.row(i);
    auto dst = out.row(i);
    for (size_t c = 0; c < h; ++c) dst[c] = tok[c] + pos[c];
  }
  return out;
}

HiddenState encoder_step_batched(const HiddenState& stacked, size_t seq_len,
                                 std::span<const std::vector<uint8_t>> masks,
                                 const Parameters& params,
                                 std::vector<std::vector<Matrix>>* attention) {
  const ModelConfig& cfg = params.config;
  const size_t slots = masks.size();
  if (stacked.rows() != slots * seq_len || stacked.cols() != cfg.hidden) {
    throw std::invalid_argument("encoder_step: expected " +
                                std::to_string(slots * seq_len) + "x" +
                                std::to_string(cfg.hidden) + " input, got " +
                                stacked.shape_string());
  }
  for (const auto& m : masks) {
    if (m.size() != seq_len) {
      throw std::invalid_argument("encoder_step: mask length mismatch");
    }
  }
  const EncoderWeights& e = params.encoder;
  const size_t dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // Only real-token rows are computed; padded rows come out as zero. Every
  // kernel below is row-wise, so compaction leaves real rows bitwise intact.
  std::vector<size_t> compact_of(stacked.rows(), 0);
  std::vector<size_t> live;
  for (size_t b = 0; b < slots; ++b) {
    for (size_t i = 0; i < seq_len; ++i) {
      if (masks[b][i] == 0) continue;
      compact_of[b * seq_len + i] = live.size();
      live.push_back(b * seq_len + i);
    }
  }
  Matrix x(live.size(), cfg.hidden);
  for (size_t r = 0; r < live.size(); ++r) {
    auto src = stacked.row(live[r]);
    std::copy(src.begin(), src.end(), x.row(r).begin());
  }

  const Matrix q = affine_rows(x, e.query, e.query_bias);
  const Matrix k = affine_rows(x, e.key, e.key_bias);
  const Matrix v = affine_rows(x, e.value, e.value_bias);
  Matrix ctx(x.rows(), cfg.hidden);

  if (attention != nullptr) {
    attention->assign(slots, std::vector<Matrix>(cfg.heads,
                                                 Matrix(seq_len, seq_len)));
  }

  std::vector<double> probs(seq_len);
  for (size_t b = 0; b < slots; ++b) {
    const auto& mask = masks[b];
    const size_t base = b * seq_len;
    for (size_t head = 0; head < cfg.heads; ++head) {
      const size_t off = head * dh;
      for (size_t i = 0; i < seq_len; ++i) {
        if (mask[i] == 0) continue;
        const double* qi = q.row(compact_of[base + i]).data() + off;
        double peak = -std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < seq_len; ++j) {
          if (mask[j] == 0) continue;
          const double* kj = k.row(compact_of[base + j]).data() + off;
          double dot = 0.0;
          for (size_t c = 0; c < dh; ++c) dot += qi[c] * kj[c];
          probs[j] = dot * scale;
          peak = std::max(peak, probs[j]);
        }
        double total = 0.0;
        for (size_t j = 0; j < seq_len; ++j) {
          if (mask[j] == 0) continue;
          probs[j] = std::exp(probs[j] - peak);
          total += probs[j];
        }
        double* out = ctx.row(compact_of[base + i]).data() + off;
        for (size_t j = 0; j < seq_len; ++j) {
          if (mask[j] == 0) continue;
          probs[j] /= total;
          const double* vj = v.row(compact_of[base + j]).data() + off;
          for (size_t c = 0; c < dh; ++c) out[c] += probs[j] * vj[c];
          if (attention != nullptr) (*attention)[b][head](i, j) = probs[j];
        }
      }
    }
  }

  add_inplace(x, affine_rows(ctx, e.output, e.output_bias));
  layer_norm_rows_inplace(x, e.attention_norm_gain, e.attention_norm_bias);

  Matrix inner = affine_rows(x, e.ffn_in, e.ffn_in_bias);
  for (double& val : inner.data()) val = gelu(val);
  add_inplace(x, affine_rows(inner, e.ffn_out, e.ffn_out_bias));
  layer_norm_rows_inplace(x, e.ffn_norm_gain, e.ffn_norm_bias);

  HiddenState out(stacked.rows(), cfg.hidden);
  for (size_t r = 0; r < live.size(); ++r) {
    auto src = x.row(r);
    std::copy(src.begin(), src.end(), out.row(live[r]).begin());
  }
  return out;
}

EncoderOutput encoder_step(const HiddenState& h, std::span<const uint8_t> mask,
                           const Parameters& params, bool keep_attention) {
  const std::vector<std::vector<uint8_t>> masks{
      std::vector<uint8_t>(mask.begin(), mask.end())};
  std::vector<std::vector<Matrix>> attention;
  EncoderOutput out;
  out.hidden = encoder_step_batched(h, h.rows(), masks, params,
                                    keep_attention ? &attention : nullptr);
  if (keep_attention) out.attention = std::move(attention[0]);
  return out;
}

std::vector<double> classify_row(std::span<const double> cls_row,
                                 const Parameters& params) {
  Matrix logits = matmul(Matrix::row_vector(cls_row), params.classifier);
  add_row_inplace(logits, params.classifier_bias);
  softmax_inplace(logits.row(0));
  auto r = logits.row(0);
  return {r.begin(), r.end()};
}

std::vector<double> classify(const HiddenState& h, const Parameters& params) {
  return classify_row(h.row(0), params);
}

size_t effective_depth(const ModelConfig& config, size_t depth_override) {
  if (depth_override == 0) return config.depth;
  if (depth_override > config.depth) {
    throw std::invalid_argument("depth override " +
                                std::to_string(depth_override) +
                                " exceeds model depth " +
                                std::to_string(config.depth));
  }
  return depth_override;
}

ForwardResult forward_with_trace(const TokenSequence& x,
                                 const Parameters& params,
                                 const std::optional<ExitPolicy>& policy,
                                 const ForwardOptions& options) {
  if (policy) policy->validate();
  const size_t depth = effective_depth(params.config, options.depth_override);
  HiddenState h = embed(x, params);
  ForwardResult result;
  for (size_t layer = 1; layer <= depth; ++layer) {
    EncoderOutput step =
        encoder_step(h, x.mask, params, options.record_attention);
    h = std::move(step.hidden);
    result.trace.push(classify(h, params));
    if (options.record_attention) {
      std::vector<double> avg(h.rows(), 0.0);
      for (const Matrix& a : step.attention) {
        for (size_t j = 0; j < avg.size(); ++j) avg[j] += a(0, j);
      }
      for (double& val : avg) val /= static_cast<double>(step.attention.size());
      result.trace.cls_attention.push_back(std::move(avg));
    }

    ExitDecision decision{layer == depth, ExitStage::kForced};
    if (policy) decision = cwb_decide(result.trace, *policy, layer, depth);
    if (decision.exit) {
      result.prediction = result.trace.labels.back();
      result.exit_layer = layer;
      result.stage = decision.stage;
      return result;
    }
  }
  throw std::logic_error("forward_with_trace: no exit at final layer");
}

TapeParameters bind_parameters(Tape& tape, const Parameters& p) {
  const auto& e = p.encoder;
  TapeParameters v;
  v.token_embedding = tape.parameter(p.token_embedding);
  v.position_embedding = tape.parameter(p.position_embedding);
  v.query = tape.parameter(e.query);
  v.query_bias = tape.parameter(e.query_bias);
  v.key = tape.parameter(e.key);
  v.key_bias = tape.parameter(e.key_bias);
  v.value = tape.parameter(e.value);
  v.value_bias = tape.parameter(e.value_bias);
  v.output = tape.parameter(e.output);
  v.output_bias = tape.parameter(e.output_bias);
  v.attention_norm_gain = tape.parameter(e.attention_norm_gain);
  v.attention_norm_bias = tape.parameter(e.attention_norm_bias);
  v.ffn_in = tape.parameter(e.ffn_in);
  v.ffn_in_bias = tape.parameter(e.ffn_in_bias);
  v.ffn_out = tape.parameter(e.ffn_out);
  v.ffn_out_bias = tape.parameter(e.ffn_out_bias);
  v.ffn_norm_gain = tape.parameter(e.ffn_norm_gain);
  v.ffn_norm_bias = tape.parameter(e.ffn_norm_bias);
  v.classifier = tape.parameter(p.classifier);
  v.classifier_bias = tape.parameter(p.classifier_bias);
  v.exit_logits = tape.parameter(p.exit_logits);
  return v;
}

std::vector<Tape::Var> forward_on_tape(Tape& tape, const TapeParameters& v,
                                       const ModelConfig& config,
                                       const TokenSequence& x) {
  x.validate(config);
  const size_t len = x.real_length();
  const std::vector<size_t> ids(x.ids.begin(),
                                x.ids.begin() + static_cast<std::ptrdiff_t>(len));
  std::vector<size_t> positions(len);
  std::iota(positions.begin(), positions.end(), size_t{0});

  Tape::Var h = tape.add(tape.gather_rows(v.token_embedding, ids),
                         tape.gather_rows(v.position_embedding, positions));
  const size_t dh = config.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<Tape::Var> probs;
  probs.reserve(config.depth);
  std::vector<Tape::Var> heads(config.heads);
  for (size_t layer = 0; layer < config.depth; ++layer) {
    const auto q = tape.add_row(tape.matmul(h, v.query), v.query_bias);
    const auto k = tape.add_row(tape.matmul(h, v.key), v.key_bias);
    const auto val = tape.add_row(tape.matmul(h, v.value), v.value_bias);
    for (size_t head = 0; head < config.heads; ++head) {
      const auto qh = tape.slice_cols(q, head * dh, dh);
      const auto kh = tape.slice_cols(k, head * dh, dh);
      const auto vh = tape.slice_cols(val, head * dh, dh);
      const auto scores = tape.scale(tape.matmul_transposed(qh, kh), scale);
      heads[head] = tape.matmul(tape.softmax_rows(scores), vh);
    }
    const auto attn =
        tape.add_row(tape.matmul(tape.concat_cols(heads), v.output),
                     v.output_bias);
    const auto x1 = tape.layer_norm_rows(tape.add(h, attn),
                                         v.attention_norm_gain,
                                         v.attention_norm_bias);
    const auto inner =
        tape.gelu(tape.add_row(tape.matmul(x1, v.ffn_in), v.ffn_in_bias));
    const auto ffn =
        tape.add_row(tape.matmul(inner, v.ffn_out), v.ffn_out_bias);
    h = tape.layer_norm_rows(tape.add(x1, ffn), v.ffn_norm_gain,
                             v.ffn_norm_bias);

    const auto logits = tape.add_row(
        tape.matmul(tape.row(h, 0), v.classifier), v.classifier_bias);
    probs.push_back(tape.softmax_rows(logits));
  }
  return probs;
}

void accumulate_gradients(const Tape& tape, const TapeParameters& vars,
                          Parameters& into) {
  const auto order = manifest_order(vars);
  auto targets = into.tensors();
  for (size_t i = 0; i < order.size(); ++i) {
    const Matrix& g = tape.grad(order[i]);
    if (g.empty()) continue;
    require_same_shape(*targets[i].tensor, g, targets[i].name.c_str());
    auto dst = targets[i].tensor->data();
    auto src = g.data();
    for (size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

}  // namespace elbert
