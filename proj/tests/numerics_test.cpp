#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "elbert/numerics/grad_check.h"
#include "elbert/numerics/matrix.h"
#include "elbert/numerics/ops.h"
#include "elbert/numerics/tape.h"
#include "test_support.h"

using namespace elbert;
using elbert::testing::flatten_all;
using elbert::testing::random_matrix;
using elbert::testing::tape_function;

TEST_CASE("matmul examples") {
  std::mt19937_64 rng(1);
  const Matrix m = random_matrix(rng, 2, 3);
  CHECK(matmul(Matrix::identity(2), m) == m);

  const Matrix a{{1, 2}, {3, 4}};
  const Matrix b{{5}, {6}};
  CHECK(matmul(a, b) == Matrix{{17}, {39}});

  const Matrix z = matmul(Matrix(2, 3), random_matrix(rng, 3, 4));
  CHECK(z == Matrix(2, 4));

  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), std::invalid_argument);
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>(3)), std::invalid_argument);
}

TEST_CASE("matmul is associative on random 4x4") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = random_matrix(rng, 4, 4);
    const Matrix b = random_matrix(rng, 4, 4);
    const Matrix c = random_matrix(rng, 4, 4);
    const Matrix left = matmul(matmul(a, b), c);
    const Matrix right = matmul(a, matmul(b, c));
    for (size_t i = 0; i < left.size(); ++i) {
      CHECK(std::abs(left.data()[i] - right.data()[i]) < 1e-9);
    }
  }
}

TEST_CASE("matmul_transposed agrees with explicit transpose") {
  std::mt19937_64 rng(3);
  const Matrix a = random_matrix(rng, 3, 5);
  const Matrix b = random_matrix(rng, 4, 5);
  CHECK(matmul_transposed(a, b) == matmul(a, transpose(b)));
}

TEST_CASE("kernels are bitwise deterministic") {
  std::mt19937_64 rng(11);
  const Matrix a = random_matrix(rng, 7, 9);
  const Matrix b = random_matrix(rng, 9, 5);
  CHECK(matmul(a, b) == matmul(a, b));
  CHECK(softmax_rows(a) == softmax_rows(a));
}

TEST_CASE("softmax rows") {
  const Matrix even = softmax_rows(Matrix{{0, 0}});
  CHECK(even(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(even(0, 1) == doctest::Approx(0.5).epsilon(1e-15));

  const Matrix two_thirds = softmax_rows(Matrix{{std::log(2.0), 0}});
  CHECK(std::abs(two_thirds(0, 0) - 2.0 / 3.0) < 1e-15);
  CHECK(std::abs(two_thirds(0, 1) - 1.0 / 3.0) < 1e-15);

  const Matrix saturated = softmax_rows(Matrix{{1000, 0}});
  CHECK(std::abs(saturated(0, 0) - 1.0) < 1e-12);
  CHECK(saturated(0, 1) < 1e-12);
}

TEST_CASE("softmax rows sum to one including large magnitudes") {
  std::mt19937_64 rng(5);
  for (double scale : {1.0, 30.0, 1e3}) {
    const Matrix p = softmax_rows(random_matrix(rng, 20, 7, scale));
    for (size_t r = 0; r < p.rows(); ++r) {
      double total = 0.0;
      for (double v : p.row(r)) {
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("layer norm") {
  const std::vector<double> gain{2.0, -1.0, 0.5};
  const std::vector<double> bias{0.1, 0.2, 0.3};
  const auto flat = layer_norm(std::vector<double>{4, 4, 4}, gain, bias);
  for (size_t i = 0; i < 3; ++i) CHECK(std::abs(flat[i] - bias[i]) < 1e-6);

  const auto unit = layer_norm(std::vector<double>{1, -1},
                               std::vector<double>{1, 1},
                               std::vector<double>{0, 0}, 1e-300);
  CHECK(unit[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(unit[1] == doctest::Approx(-1.0).epsilon(1e-15));

  std::mt19937_64 rng(2);
  const Matrix x = random_matrix(rng, 1, 9, 5.0);
  const auto centered = layer_norm(x.row(0), std::vector<double>(9, 1.0),
                                   std::vector<double>(9, 0.0));
  double mean = 0.0;
  for (double v : centered) mean += v;
  CHECK(std::abs(mean / 9.0) < 1e-12);

  CHECK_THROWS_AS(layer_norm(std::vector<double>{1, 2}, gain, bias),
                  std::invalid_argument);
}

TEST_CASE("gelu") {
  CHECK(gelu(0.0) == 0.0);
  CHECK(std::abs(gelu(10.0) - 10.0) < 1e-9);
  // 1 * Phi(1) evaluated with 40-digit arithmetic.
  CHECK(std::abs(gelu(1.0) - 0.8413447460685429485852325) < 1e-15);
}

TEST_CASE("cross entropy") {
  CHECK(cross_entropy(std::vector<double>{1.0, 0.0}, 0) == 0.0);
  const std::vector<double> uniform(3, 1.0 / 3.0);
  for (size_t label = 0; label < 3; ++label) {
    CHECK(std::abs(cross_entropy(uniform, label) - std::log(3.0)) < 1e-15);
  }
  CHECK(cross_entropy(std::vector<double>{0.9, 0.1}, 1) ==
        doctest::Approx(-std::log(0.1)).epsilon(1e-15));
  // p[label] = 0 is clamped rather than infinite.
  CHECK(cross_entropy(std::vector<double>{1.0, 0.0}, 1) ==
        doctest::Approx(-std::log(1e-12)));
  CHECK_THROWS_AS(cross_entropy(std::vector<double>{0.5, 0.5}, 2),
                  std::invalid_argument);
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  CHECK(argmax(std::vector<double>{0.2, 0.4, 0.4}) == 1);
  CHECK(argmax(std::vector<double>{0.5, 0.5}) == 0);
}

TEST_CASE("grad_check: quadratic is exact") {
  DifferentiableFunction f;
  f.value = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  f.gradient = [](std::span<const double> x) {
    std::vector<double> g(x.begin(), x.end());
    for (double& v : g) v *= 2.0;
    return g;
  };
  const std::vector<double> theta{0.3, -1.7, 2.5, 4.0};
  CHECK(grad_check(f, theta).max_relative_error < 1e-8);
}

TEST_CASE("grad_check: cross entropy of softmax") {
  std::mt19937_64 rng(9);
  const Matrix logits = random_matrix(rng, 1, 5, 2.0);
  const auto f = tape_function({logits}, [](Tape& t, const auto& v) {
    return t.cross_entropy(t.softmax_rows(v[0]), 3);
  });
  CHECK(grad_check(f, flatten_all({logits})).max_relative_error < 1e-6);
}

TEST_CASE("grad_check reports non-finite gradients") {
  DifferentiableFunction f;
  f.value = [](std::span<const double>) { return 0.0; };
  f.gradient = [](std::span<const double> x) {
    return std::vector<double>(x.size(), std::numeric_limits<double>::quiet_NaN());
  };
  CHECK_THROWS_AS(grad_check(f, std::vector<double>{1.0}), std::runtime_error);
}

// Every tape primitive against central differences. A random weighting
// reduces each output to a scalar so all output coordinates matter.
TEST_CASE("tape primitives match finite differences") {
  std::mt19937_64 rng(21);
  const Matrix a = random_matrix(rng, 3, 4);
  const Matrix b = random_matrix(rng, 4, 5);
  const Matrix c = random_matrix(rng, 3, 4);
  const Matrix row = random_matrix(rng, 1, 4);
  const Matrix gain = random_matrix(rng, 1, 4);
  const Matrix bias = random_matrix(rng, 1, 4);
  const Matrix table = random_matrix(rng, 6, 4);

  auto reduce = [w = random_matrix(rng, 8, 8)](Tape& t, Tape::Var x) {
    const Matrix& v = t.value(x);
    Matrix weights(v.rows(), v.cols());
    for (size_t r = 0; r < v.rows(); ++r) {
      for (size_t col = 0; col < v.cols(); ++col) weights(r, col) = w(r, col);
    }
    return t.sum(t.mul(x, t.constant(weights)));
  };

  struct Case {
    const char* name;
    std::vector<Matrix> inputs;
    std::function<Tape::Var(Tape&, const std::vector<Tape::Var>&)> expr;
  };
  const std::vector<Case> cases = {
      {"matmul", {a, b}, [&](Tape& t, const auto& v) { return reduce(t, t.matmul(v[0], v[1])); }},
      {"matmul_transposed", {a, c},
       [&](Tape& t, const auto& v) { return reduce(t, t.matmul_transposed(v[0], v[1])); }},
      {"add", {a, c}, [&](Tape& t, const auto& v) { return reduce(t, t.add(v[0], v[1])); }},
      {"add_row", {a, row}, [&](Tape& t, const auto& v) { return reduce(t, t.add_row(v[0], v[1])); }},
      {"mul", {a, c}, [&](Tape& t, const auto& v) { return reduce(t, t.mul(v[0], v[1])); }},
      {"affine", {a}, [&](Tape& t, const auto& v) { return reduce(t, t.affine(v[0], -1.5, 2.0)); }},
      {"gelu", {a}, [&](Tape& t, const auto& v) { return reduce(t, t.gelu(v[0])); }},
      {"sigmoid", {a}, [&](Tape& t, const auto& v) { return reduce(t, t.sigmoid(v[0])); }},
      {"softmax_rows", {a}, [&](Tape& t, const auto& v) { return reduce(t, t.softmax_rows(v[0])); }},
      {"layer_norm_rows", {a, gain, bias},
       [&](Tape& t, const auto& v) { return reduce(t, t.layer_norm_rows(v[0], v[1], v[2])); }},
      {"slice_cols", {a}, [&](Tape& t, const auto& v) { return reduce(t, t.slice_cols(v[0], 1, 2)); }},
      {"concat_cols", {a, c},
       [&](Tape& t, const auto& v) {
         const std::vector<Tape::Var> parts{v[0], v[1]};
         return reduce(t, t.concat_cols(parts));
       }},
      {"row", {a}, [&](Tape& t, const auto& v) { return reduce(t, t.row(v[0], 2)); }},
      {"element", {a}, [&](Tape& t, const auto& v) { return t.element(v[0], 1, 3); }},
      {"gather_rows", {table},
       [&](Tape& t, const auto& v) {
         const std::vector<size_t> ids{4, 0, 4};
         return reduce(t, t.gather_rows(v[0], ids));
       }},
      {"cross_entropy", {row},
       [&](Tape& t, const auto& v) { return t.cross_entropy(t.softmax_rows(v[0]), 2); }},
  };
  for (const auto& tc : cases) {
    CAPTURE(tc.name);
    const auto f = tape_function(tc.inputs, tc.expr);
    CHECK(grad_check(f, flatten_all(tc.inputs)).max_relative_error < 1e-6);
  }
}

TEST_CASE("tape accumulates gradient through shared uses") {
  const Matrix x{{3.0, -2.0}};
  Tape tape;
  const auto v = tape.parameter(x);
  const auto y = tape.sum(tape.mul(v, v));
  tape.backward(y);
  CHECK(tape.grad(v) == Matrix{{6.0, -4.0}});
  CHECK_THROWS_AS(tape.backward(v), std::invalid_argument);
}

TEST_CASE("constants receive no gradient") {
  Tape tape;
  const auto c = tape.constant(Matrix{{1.0, 2.0}});
  const auto p = tape.parameter(Matrix{{0.5, 0.5}});
  tape.backward(tape.sum(tape.mul(c, p)));
  CHECK(tape.grad(c).empty());
  CHECK(!tape.requires_grad(c));
}
