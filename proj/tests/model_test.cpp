#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

#include <unistd.h>

#include "doctest.h"
#include "elbert/model/model.h"
#include "elbert/model/weight_file.h"
#include "elbert/numerics/ops.h"
#include "test_support.h"

using namespace elbert;
using elbert::testing::random_params;
using elbert::testing::random_sequence;
using elbert::testing::tiny_config;

namespace {

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() /
         ("elbert_model_test_" + std::to_string(::getpid()) + "_" + name);
}

}  // namespace

TEST_CASE("config validation") {
  CHECK_NOTHROW(ModelConfig{}.validate());
  ModelConfig c = tiny_config();
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.depth = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.classes = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = tiny_config();
  c.max_seq_len = 1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("exit logits start at 4") {
  const Parameters p = Parameters::initialize(tiny_config(), 1);
  CHECK(p.exit_logits.cols() == tiny_config().depth - 1);
  for (double t : p.exit_logits.data()) CHECK(t == 4.0);
}

TEST_CASE("embed") {
  const ModelConfig cfg = tiny_config();
  const Parameters zero = Parameters::zeros(cfg);
  const auto seq = TokenSequence::unpadded({kClsId, 5, 6}).padded_to(cfg.max_seq_len);
  CHECK(embed(seq, zero) == Matrix(cfg.max_seq_len, cfg.hidden));

  const Parameters p = Parameters::initialize(cfg, 3);
  const auto cls_only = TokenSequence::unpadded({kClsId}).padded_to(cfg.max_seq_len);
  const Matrix h = embed(cls_only, p);
  for (size_t c = 0; c < cfg.hidden; ++c) {
    CHECK(h(0, c) == p.token_embedding(kClsId, c) + p.position_embedding(0, c));
  }
  for (size_t r = 1; r < h.rows(); ++r) {
    for (double v : h.row(r)) CHECK(v == 0.0);
  }

  const auto short_pad = TokenSequence::unpadded({kClsId, 7, 8}).padded_to(4);
  const auto long_pad = TokenSequence::unpadded({kClsId, 7, 8}).padded_to(cfg.max_seq_len);
  const Matrix a = embed(short_pad, p);
  const Matrix b = embed(long_pad, p);
  for (size_t r = 0; r < 3; ++r) CHECK(max_abs_diff(a.row(r), b.row(r)) == 0.0);

  const auto bad = TokenSequence::unpadded({kClsId, cfg.vocab});
  CHECK_THROWS_AS(embed(bad, p), std::invalid_argument);
}

TEST_CASE("token sequence validation") {
  const ModelConfig cfg = tiny_config();
  CHECK_THROWS_AS(TokenSequence::unpadded({kClsId, 3}).padded_to(1),
                  std::invalid_argument);
  TokenSequence holes = TokenSequence::unpadded({kClsId, 3, 4});
  holes.mask[1] = 0;
  CHECK_THROWS_AS(holes.validate(cfg), std::invalid_argument);
  TokenSequence masked_cls = TokenSequence::unpadded({kClsId, 3});
  masked_cls.mask[0] = 0;
  CHECK_THROWS_AS(masked_cls.validate(cfg), std::invalid_argument);
}

TEST_CASE("encoder step keeps shape and attention rows are distributions") {
  const ModelConfig cfg = tiny_config();
  const Parameters p = random_params(cfg, 4);
  std::mt19937_64 rng(4);
  const auto seq = random_sequence(rng, cfg, 3, 7).padded_to(cfg.max_seq_len);
  const Matrix h = embed(seq, p);
  const EncoderOutput out = encoder_step(h, seq.mask, p, true);
  CHECK(out.hidden.rows() == h.rows());
  CHECK(out.hidden.cols() == h.cols());
  REQUIRE(out.attention.size() == cfg.heads);
  const size_t real = seq.real_length();
  for (const Matrix& a : out.attention) {
    for (size_t r = 0; r < real; ++r) {
      double total = 0.0;
      for (size_t c = 0; c < real; ++c) total += a(r, c);
      for (size_t c = real; c < a.cols(); ++c) CHECK(a(r, c) == 0.0);
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("batched encoder matches running each sample alone") {
  const ModelConfig cfg = tiny_config();
  const Parameters p = random_params(cfg, 5);
  std::mt19937_64 rng(5);
  const size_t n = 5;
  const size_t s = cfg.max_seq_len;
  std::vector<TokenSequence> seqs;
  for (size_t i = 0; i < n; ++i) {
    seqs.push_back(random_sequence(rng, cfg, 1).padded_to(s));
  }
  Matrix stacked(n * s, cfg.hidden);
  std::vector<std::vector<uint8_t>> masks;
  for (size_t i = 0; i < n; ++i) {
    const Matrix e = embed(seqs[i], p);
    std::copy(e.data().begin(), e.data().end(),
              stacked.data().begin() + static_cast<std::ptrdiff_t>(i * s * cfg.hidden));
    masks.push_back(seqs[i].mask);
  }
  const Matrix batched = encoder_step_batched(stacked, s, masks, p);
  for (size_t i = 0; i < n; ++i) {
    const Matrix alone = encoder_step(embed(seqs[i], p), seqs[i].mask, p).hidden;
    for (size_t r = 0; r < seqs[i].real_length(); ++r) {
      CHECK(max_abs_diff(alone.row(r), batched.row(i * s + r)) <= 1e-9);
    }
  }
}

TEST_CASE("padding amount does not change outputs") {
  const ModelConfig cfg = tiny_config();
  const Parameters p = random_params(cfg, 6);
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto seq = random_sequence(rng, cfg, 1, 6);
    const auto a = forward_with_trace(seq.padded_to(6), p, std::nullopt);
    const auto b = forward_with_trace(seq.padded_to(cfg.max_seq_len), p, std::nullopt);
    for (size_t i = 0; i < a.trace.size(); ++i) {
      CHECK(max_abs_diff(a.trace.probabilities[i], b.trace.probabilities[i]) <= 1e-9);
    }
  }
}

TEST_CASE("classify") {
  const ModelConfig cfg = tiny_config();
  Parameters p = Parameters::initialize(cfg, 7);
  p.classifier.fill(0.0);
  p.classifier_bias.fill(0.0);
  std::mt19937_64 rng(7);
  const Matrix h = elbert::testing::random_matrix(rng, cfg.max_seq_len, cfg.hidden);
  for (double v : classify(h, p)) CHECK(std::abs(v - 1.0 / 3.0) < 1e-15);

  ModelConfig two = cfg;
  two.classes = 2;
  Parameters q = Parameters::zeros(two);
  q.classifier_bias(0, 0) = std::log(2.0);
  const auto probs = classify(h, q);
  CHECK(std::abs(probs[0] - 2.0 / 3.0) < 1e-15);
  CHECK(std::abs(probs[1] - 1.0 / 3.0) < 1e-15);

  LayerTrace trace;
  trace.push({0.25, 0.375, 0.375});
  CHECK(trace.labels.back() == 1);
}

TEST_CASE("no policy runs every layer") {
  const ModelConfig cfg = tiny_config();
  const Parameters p = random_params(cfg, 8);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 10; ++i) {
    const auto r = forward_with_trace(random_sequence(rng, cfg), p, std::nullopt);
    CHECK(r.exit_layer == cfg.depth);
    CHECK(r.trace.size() == cfg.depth);
    CHECK(r.stage == ExitStage::kForced);
    CHECK(r.prediction == argmax(r.trace.last()));
  }
}

TEST_CASE("delta 1 exits at layer 1 unless p1 is uniform") {
  const ModelConfig cfg = tiny_config();
  const Parameters p = random_params(cfg, 9);
  std::mt19937_64 rng(9);
  ExitPolicy policy;
  policy.delta = 1.0;
  for (int i = 0; i < 20; ++i) {
    const auto r = forward_with_trace(random_sequence(rng, cfg), p, policy);
    CHECK(r.exit_layer == 1);
    CHECK(r.stage == ExitStage::kStage1);
  }
  // Zero classifier gives an exactly uniform p1, so stage 1 cannot fire.
  Parameters flat = p;
  flat.classifier.fill(0.0);
  flat.classifier_bias.fill(0.0);
  policy.window = ExitPolicy::kNoWindow;
  const auto r = forward_with_trace(random_sequence(rng, cfg), flat, policy);
  CHECK(r.exit_layer == cfg.depth);
}

TEST_CASE("forward_with_trace agrees with a full-depth replay") {
  const ModelConfig cfg = tiny_config();
  const Parameters p = random_params(cfg, 10, 0.5);
  std::mt19937_64 rng(10);
  const std::vector<ExitPolicy> policies = [] {
    std::vector<ExitPolicy> out;
    for (double delta : {0.0, 0.2, 0.5, 0.8}) {
      for (auto crit : {WindowCriterion::kBiasTrend, WindowCriterion::kRange,
                        WindowCriterion::kStableLabel}) {
        ExitPolicy e;
        e.delta = delta;
        e.window = 3;
        e.criterion = crit;
        e.range_eps = 0.1;
        out.push_back(e);
      }
    }
    return out;
  }();

  size_t early = 0;
  for (int i = 0; i < 100; ++i) {
    const auto seq = random_sequence(rng, cfg).padded_to(cfg.max_seq_len);
    // Materialize every hidden state first, classify offline.
    std::vector<Matrix> states;
    Matrix h = embed(seq, p);
    for (size_t layer = 0; layer < cfg.depth; ++layer) {
      h = encoder_step(h, seq.mask, p).hidden;
      states.push_back(h);
    }
    LayerTrace full;
    for (const Matrix& s : states) full.push(classify(s, p));

    for (const ExitPolicy& policy : policies) {
      size_t expected_layer = cfg.depth;
      LayerTrace prefix;
      for (size_t layer = 1; layer <= cfg.depth; ++layer) {
        prefix.push(full.probabilities[layer - 1]);
        if (cwb_decide(prefix, policy, layer, cfg.depth).exit) {
          expected_layer = layer;
          break;
        }
      }
      const auto r = forward_with_trace(seq, p, policy);
      CHECK(r.exit_layer == expected_layer);
      CHECK(r.prediction == full.labels[expected_layer - 1]);
      for (size_t k = 0; k < r.trace.size(); ++k) {
        // Bitwise: the online trace is exactly the offline classification.
        CHECK(r.trace.probabilities[k] == full.probabilities[k]);
      }
      if (expected_layer < cfg.depth) ++early;
    }
  }
  CHECK(early > 0);
}

TEST_CASE("raising delta never delays the stage-1 exit") {
  const ModelConfig cfg = tiny_config();
  const Parameters p = random_params(cfg, 11, 0.5);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 30; ++i) {
    const auto seq = random_sequence(rng, cfg);
    size_t previous = cfg.depth + 1;
    for (int k = 0; k <= 10; ++k) {
      ExitPolicy policy;
      policy.delta = k / 10.0;
      policy.window = ExitPolicy::kNoWindow;
      const size_t layer = forward_with_trace(seq, p, policy).exit_layer;
      CHECK(layer <= previous);
      previous = layer;
    }
  }
}

TEST_CASE("depth override caps the layers") {
  const ModelConfig cfg = tiny_config();
  const Parameters p = random_params(cfg, 12);
  std::mt19937_64 rng(12);
  const auto r = forward_with_trace(random_sequence(rng, cfg), p, std::nullopt, {3, false});
  CHECK(r.exit_layer == 3);
  CHECK(effective_depth(cfg, 0) == cfg.depth);
  CHECK_THROWS_AS(effective_depth(cfg, cfg.depth + 1), std::invalid_argument);
}

TEST_CASE("shared parameter count does not depend on depth") {
  ModelConfig shallow = tiny_config();
  ModelConfig deep = tiny_config();
  shallow.depth = 2;
  deep.depth = 24;
  const Parameters a = Parameters::zeros(shallow);
  const Parameters b = Parameters::zeros(deep);
  CHECK(a.shared_count() == b.shared_count());
  CHECK(b.count() - a.count() == 22);

  const auto path_a = temp_file("shallow.bin");
  const auto path_b = temp_file("deep.bin");
  save_parameters(path_a, a);
  save_parameters(path_b, b);
  // Only the exit logits and the header's depth digits differ.
  const auto size_a = std::filesystem::file_size(path_a);
  const auto size_b = std::filesystem::file_size(path_b);
  CHECK(size_b - size_a < 22 * 8 + 8);
  std::filesystem::remove(path_a);
  std::filesystem::remove(path_b);
}

TEST_CASE("weight file round trip is bit exact") {
  const Parameters p = random_params(tiny_config(), 13);
  const auto path = temp_file("roundtrip.bin");
  save_parameters(path, p);
  const Parameters q = load_parameters(path);
  CHECK(q == p);
  std::filesystem::remove(path);
}

TEST_CASE("weight file rejects damaged input") {
  const auto path = temp_file("damaged.bin");
  {
    std::ofstream out(path, std::ios::binary);
    out << "not-a-weight-file\n";
  }
  CHECK_THROWS_AS(load_parameters(path), std::runtime_error);

  save_parameters(path, Parameters::zeros(tiny_config()));
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  CHECK_THROWS_AS(load_parameters(path), std::runtime_error);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_parameters(path), std::runtime_error);
}

TEST_CASE("flatten and unflatten are inverse") {
  Parameters p = random_params(tiny_config(), 14);
  const auto flat = p.flatten();
  CHECK(flat.size() == p.count());
  Parameters q = Parameters::zeros(tiny_config());
  q.unflatten(flat);
  CHECK(q == p);
}
