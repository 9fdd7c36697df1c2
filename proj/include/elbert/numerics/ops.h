#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "elbert/numerics/matrix.h"

namespace elbert {

inline constexpr double kLayerNormEps = 1e-12;
inline constexpr double kProbabilityClamp = 1e-12;

// All kernels below sum in a fixed order (row-major, left to right over the
// reduction index) so identical inputs give bitwise identical outputs.

Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T without materializing the transpose.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

// Adds a 1 x cols row to every row of m.
void add_row_inplace(Matrix& m, const Matrix& row);

void softmax_inplace(std::span<double> values);
Matrix softmax_rows(const Matrix& m);

std::vector<double> layer_norm(std::span<const double> x,
                               std::span<const double> gain,
                               std::span<const double> bias,
                               double eps = kLayerNormEps);
void layer_norm_rows_inplace(Matrix& m, const Matrix& gain, const Matrix& bias,
                             double eps = kLayerNormEps);

// Exact erf form: x * Phi(x).
double gelu(double x);
double gelu_derivative(double x);
double sigmoid(double x);

// -log p[label] with p[label] clamped to kProbabilityClamp.
double cross_entropy(std::span<const double> p, size_t label);

// Lowest index wins ties.
size_t argmax(std::span<const double> values);

}  // namespace elbert
