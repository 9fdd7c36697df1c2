#include "elbert/numerics/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace elbert {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: dimension mismatch " +
                                a.shape_string() + " x " + b.shape_string());
  }
  const size_t n = a.rows();
  const size_t inner = a.cols();
  const size_t m = b.cols();
  Matrix c(n, m);
  for (size_t i = 0; i < n; ++i) {
    double* out = c.row(i).data();
    for (size_t k = 0; k < inner; ++k) {
      const double aik = a(i, k);
      const double* brow = b.row(k).data();
      for (size_t j = 0; j < m; ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("matmul_transposed: dimension mismatch " +
                                a.shape_string() + " x " + b.shape_string() +
                                "^T");
  }
  Matrix c(a.rows(), b.rows());
  for (size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i).data();
    for (size_t j = 0; j < b.rows(); ++j) {
      const double* brow = b.row(j).data();
      double acc = 0.0;
      for (size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
      c(i, j) = acc;
    }
  }
  return c;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (size_t r = 0; r < m.rows(); ++r) {
    for (size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  }
  return t;
}

void add_row_inplace(Matrix& m, const Matrix& row) {
  if (row.rows() != 1 || row.cols() != m.cols()) {
    throw std::invalid_argument("add_row: expected 1x" +
                                std::to_string(m.cols()) + " row, got " +
                                row.shape_string());
  }
  for (size_t r = 0; r < m.rows(); ++r) {
    double* out = m.row(r).data();
    for (size_t c = 0; c < m.cols(); ++c) out[c] += row(0, c);
  }
}

void softmax_inplace(std::span<double> values) {
  if (values.empty()) return;
  const double peak = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (double& v : values) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : values) v /= total;
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out = m;
  for (size_t r = 0; r < out.rows(); ++r) softmax_inplace(out.row(r));
  return out;
}

std::vector<double> layer_norm(std::span<const double> x,
                               std::span<const double> gain,
                               std::span<const double> bias, double eps) {
  if (x.size() != gain.size() || x.size() != bias.size()) {
    throw std::invalid_argument("layer_norm: length mismatch");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("layer_norm: eps must be > 0");
  const size_t n = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double inv_std = 1.0 / std::sqrt(var + eps);
  std::vector<double> out(n);
  for (size_t i = 0; i < n; ++i) {
    out[i] = (x[i] - mean) * inv_std * gain[i] + bias[i];
  }
  return out;
}

void layer_norm_rows_inplace(Matrix& m, const Matrix& gain, const Matrix& bias,
                             double eps) {
  for (size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    const auto normed = layer_norm(row, gain.data(), bias.data(), eps);
    std::copy(normed.begin(), normed.end(), row.begin());
  }
}

double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
}

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
  const double pdf =
      std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi * kInvSqrt2;
  return cdf + x * pdf;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double cross_entropy(std::span<const double> p, size_t label) {
  if (label >= p.size()) {
    throw std::invalid_argument("cross_entropy: label " +
                                std::to_string(label) + " out of range for " +
                                std::to_string(p.size()) + " classes");
  }
  return -std::log(std::max(p[label], kProbabilityClamp));
}

size_t argmax(std::span<const double> values) {
  size_t best = 0;
  for (size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace elbert
