#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "elbert/numerics/grad_check.h"
#include "elbert/numerics/ops.h"
#include "elbert/training/objective.h"
#include "elbert/training/trainer.h"
#include "test_support.h"

using namespace elbert;
using elbert::testing::random_params;
using elbert::testing::random_sequence;
using elbert::testing::tiny_config;

namespace {

Parameters zeroed(const Parameters& like) {
  Parameters z = like;
  for (auto& t : z.tensors()) t.tensor->fill(0.0);
  return z;
}

LayerTrace uniform_trace(size_t depth, size_t classes) {
  LayerTrace t;
  for (size_t i = 0; i < depth; ++i) {
    t.push(std::vector<double>(classes, 1.0 / static_cast<double>(classes)));
  }
  return t;
}

// Tiny task: the token right after [CLS] decides the label.
std::vector<Example> keyed_examples(const ModelConfig& cfg, size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<size_t> noise(10, cfg.vocab - 1);
  std::vector<Example> out;
  for (size_t i = 0; i < n; ++i) {
    const size_t label = i % cfg.classes;
    std::vector<size_t> ids{kClsId, 3 + label};
    for (int k = 0; k < 3; ++k) ids.push_back(noise(rng));
    out.push_back({TokenSequence::unpadded(ids), label});
  }
  return out;
}

}  // namespace

TEST_CASE("layer losses") {
  LayerTrace onehot;
  for (int i = 0; i < 4; ++i) onehot.push({0.0, 1.0, 0.0});
  for (double l : layer_losses(onehot, 1, 4)) CHECK(l == 0.0);

  for (double l : layer_losses(uniform_trace(5, 3), 2, 5)) {
    CHECK(std::abs(l - 1.098612288668109691395245) < 1e-15);
  }

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  LayerTrace random;
  for (int i = 0; i < 6; ++i) {
    std::vector<double> p{u(rng), u(rng), u(rng)};
    const double s = p[0] + p[1] + p[2];
    for (double& v : p) v /= s;
    random.push(p);
  }
  const auto losses = layer_losses(random, 0, 6);
  for (size_t i = 0; i < 6; ++i) {
    CHECK(losses[i] == -std::log(random.probabilities[i][0]));
  }

  CHECK_THROWS_AS(layer_losses(random, 3, 6), std::invalid_argument);
  CHECK_THROWS_AS(layer_losses(random, 0, 5), std::invalid_argument);
}

TEST_CASE("exit weights") {
  const auto w = exit_weights(std::vector<double>(3, 0.0));
  REQUIRE(w.size() == 4);
  CHECK(w[0] == 0.5);
  CHECK(w[1] == 0.5);
  CHECK(w[2] == 0.5);
  CHECK(w[3] == 2.5);

  // sigmoid(4) and 24 - 23 sigmoid(4) from 40-digit evaluation.
  const auto deep = exit_weights(std::vector<double>(23, 4.0));
  REQUIRE(deep.size() == 24);
  for (size_t i = 0; i < 23; ++i) {
    CHECK(std::abs(deep[i] - 0.9820137900379084419732069) < 1e-15);
  }
  CHECK(std::abs(deep[23] - 1.413682829128105834616242) < 1e-13);

  std::mt19937_64 rng(2);
  std::normal_distribution<double> t(0.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> logits(1 + static_cast<size_t>(trial % 23));
    for (double& v : logits) v = t(rng);
    double total = 0.0;
    for (double v : exit_weights(logits)) total += v;
    CHECK(std::abs(total - static_cast<double>(logits.size() + 1)) < 1e-12);
  }
}

TEST_CASE("total loss examples") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> t(0.0, 3.0);
  const LayerTrace uniform = uniform_trace(5, 3);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> logits(4);
    for (double& v : logits) v = t(rng);
    CHECK(std::abs(total_loss(uniform, 1, logits) - 5.0 * std::log(3.0)) < 1e-12);
  }

  // CE of 2 and 4 at layers 1 and 2 with t1 = 0.
  LayerTrace trace;
  trace.push({std::exp(-2.0), 1.0 - std::exp(-2.0)});
  trace.push({std::exp(-4.0), 1.0 - std::exp(-4.0)});
  CHECK(std::abs(total_loss(trace, 0, std::vector<double>{0.0}) - 7.0) < 1e-12);
}

TEST_CASE("exit logit gradient is sigma'(t1) (L1 - L2)") {
  const std::vector<double> p1{0.3, 0.7};
  const std::vector<double> p2{0.8, 0.2};
  const double l1 = -std::log(p1[0]);
  const double l2 = -std::log(p2[0]);

  DifferentiableFunction f;
  f.value = [&](std::span<const double> t) {
    LayerTrace trace;
    trace.push(p1);
    trace.push(p2);
    return total_loss(trace, 0, t);
  };
  f.gradient = [&](std::span<const double> t) {
    Tape tape;
    const Matrix logits = Matrix::row_vector(t);
    const auto tv = tape.parameter(logits);
    const std::vector<Tape::Var> probs{tape.constant(Matrix::row_vector(p1)),
                                       tape.constant(Matrix::row_vector(p2))};
    tape.backward(total_loss_on_tape(tape, tv, probs, 0));
    const Matrix& g = tape.grad(tv);
    return std::vector<double>(g.data().begin(), g.data().end());
  };
  for (double t1 : {-2.0, 0.0, 1.5, 4.0}) {
    const std::vector<double> theta{t1};
    const double s = sigmoid(t1);
    CHECK(std::abs(f.gradient(theta)[0] - s * (1.0 - s) * (l1 - l2)) < 1e-12);
    CHECK(grad_check(f, theta).max_relative_error < 1e-8);
  }
}

TEST_CASE("tape loss equals inference loss") {
  const ModelConfig cfg = tiny_config();
  const Parameters p = random_params(cfg, 4);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 10; ++i) {
    const Example ex{random_sequence(rng, cfg, 2), static_cast<size_t>(i % 3)};
    Parameters g = zeroed(p);
    const double tape_loss = accumulate_example_gradient(p, ex, g);
    const auto r = forward_with_trace(ex.tokens, p, std::nullopt);
    const double direct = total_loss(r.trace, ex.label, p.exit_logits.data());
    CHECK(std::abs(tape_loss - direct) < 1e-12);
  }
}

TEST_CASE("full model gradient matches finite differences") {
  const ModelConfig cfg = tiny_config();
  const Parameters base = random_params(cfg, 5, 0.2);
  std::mt19937_64 rng(5);
  const Example ex{random_sequence(rng, cfg, 4, 8), 2};

  DifferentiableFunction f;
  f.value = [&](std::span<const double> theta) {
    Parameters p = base;
    p.unflatten(theta);
    const auto r = forward_with_trace(ex.tokens, p, std::nullopt);
    return total_loss(r.trace, ex.label, p.exit_logits.data());
  };
  f.gradient = [&](std::span<const double> theta) {
    Parameters p = base;
    p.unflatten(theta);
    Parameters g = zeroed(p);
    accumulate_example_gradient(p, ex, g);
    return g.flatten();
  };
  const auto report = grad_check(f, base.flatten());
  CHECK(report.checked == base.count());
  CHECK(report.max_relative_error < 1e-4);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const ModelConfig cfg = tiny_config();
  const Parameters p = random_params(cfg, 6);
  const auto data = keyed_examples(cfg, 12, 6);
  TrainConfig tc;
  tc.learning_rate = 0.0;
  tc.batch_size = 4;
  tc.epochs = 2;
  const TrainResult r = train(p, data, {}, tc);
  CHECK(r.params == p);
  CHECK(r.history.size() == 2);
  CHECK_FALSE(r.history[0].validation_accuracy.has_value());
}

TEST_CASE("training is reproducible from the seed") {
  const ModelConfig cfg = tiny_config();
  const Parameters p = Parameters::initialize(cfg, 7);
  const auto data = keyed_examples(cfg, 24, 7);
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.batch_size = 8;
  tc.epochs = 2;
  tc.seed = 99;
  const TrainResult a = train(p, data, data, tc);
  const TrainResult b = train(p, data, data, tc);
  CHECK(a.history[0].mean_loss == b.history[0].mean_loss);
  CHECK(a.params == b.params);
  CHECK(a.optimizer.step == 6);
}

TEST_CASE("training learns a keyed toy task") {
  const ModelConfig cfg = tiny_config();
  const auto data = keyed_examples(cfg, 60, 8);
  TrainConfig tc;
  tc.learning_rate = 3e-3;
  tc.batch_size = 6;
  tc.epochs = 15;
  tc.seed = 8;
  tc.stop_at_accuracy = 1.0;
  const TrainResult r = train(Parameters::initialize(cfg, 8), data, data, tc);
  CHECK(r.history.back().mean_loss < r.history.front().mean_loss);
  CHECK(*r.history.back().validation_accuracy >= 0.95);
  // The exit logits are trainable and moved.
  CHECK(r.params.exit_logits != Parameters::initialize(cfg, 8).exit_logits);
}

TEST_CASE("divergence is reported") {
  const ModelConfig cfg = tiny_config();
  Parameters p = Parameters::initialize(cfg, 9);
  p.classifier(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig tc;
  tc.batch_size = 2;
  tc.epochs = 1;
  CHECK_THROWS_AS(train(p, keyed_examples(cfg, 4, 9), {}, tc), std::runtime_error);
}

TEST_CASE("train config validation") {
  TrainConfig tc;
  CHECK(tc.learning_rate == 3e-5);
  CHECK(tc.batch_size == 32);
  CHECK(tc.epochs == 10);
  tc.batch_size = 0;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
  tc = TrainConfig{};
  tc.learning_rate = -1.0;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
}

TEST_CASE("checkpoint carries optimizer state") {
  const ModelConfig cfg = tiny_config();
  const auto data = keyed_examples(cfg, 8, 10);
  TrainConfig tc;
  tc.learning_rate = 1e-3;
  tc.batch_size = 4;
  tc.epochs = 1;
  const TrainResult r = train(Parameters::initialize(cfg, 10), data, {}, tc);
  const WeightFile file = to_checkpoint(r.params, r.optimizer);
  const AdamState back = optimizer_from(file, r.params);
  CHECK(back.step == r.optimizer.step);
  CHECK(back.first_moment == r.optimizer.first_moment);
  CHECK(back.second_moment == r.optimizer.second_moment);
  CHECK(parameters_from(file) == r.params);
}
