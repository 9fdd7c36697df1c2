#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace elbert {

// Dense row-major matrix of doubles. Hidden states, weights and gradients all
// live in this type; a row vector is a 1 x n matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols, double fill = 0.0);
  Matrix(size_t rows, size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(size_t n);
  static Matrix row_vector(std::span<const double> values);

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
  double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }

  void fill(double value);
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;
  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> data_;
};

// Throws std::invalid_argument naming `what` when shapes differ.
void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

}  // namespace elbert
