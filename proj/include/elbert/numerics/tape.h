#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "elbert/numerics/matrix.h"
#include "elbert/numerics/ops.h"

namespace elbert {

// Reverse-mode autodiff over whole matrices. Nodes are appended in
// evaluation order, so walking them backwards is a valid topological order
// and every node's backward rule runs exactly once.
//
// A Tape is single-use and single-threaded: build one per loss evaluation.
class Tape {
 public:
  struct Var {
    size_t index = 0;
  };

  Var constant(Matrix value);
  // Tracks gradient for storage owned by the caller; the matrix must outlive
  // the tape and stay unmodified until backward() has run.
  Var parameter(const Matrix& value);

  const Matrix& value(Var v) const;
  // Empty (0x0) when no gradient flowed into v.
  const Matrix& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.index].requires_grad; }
  size_t size() const { return nodes_.size(); }

  Var matmul(Var a, Var b);
  Var matmul_transposed(Var a, Var b);  // a * b^T
  Var add(Var a, Var b);
  Var add_row(Var m, Var row);          // broadcast 1 x cols over rows
  Var mul(Var a, Var b);                // elementwise
  Var scale(Var a, double factor);
  Var affine(Var a, double factor, double shift);
  Var gelu(Var a);
  Var sigmoid(Var a);
  Var softmax_rows(Var a);
  Var layer_norm_rows(Var x, Var gain, Var bias, double eps = kLayerNormEps);
  Var slice_cols(Var a, size_t begin, size_t count);
  Var concat_cols(std::span<const Var> parts);
  Var row(Var a, size_t r);
  Var element(Var a, size_t r, size_t c);
  Var sum(Var a);
  Var gather_rows(Var table, std::span<const size_t> ids);
  // Clamped negative log-likelihood of a 1 x C probability row.
  Var cross_entropy(Var probs, size_t label);

  // Seeds d(root)/d(root) = 1; root must be 1x1.
  void backward(Var root);

 private:
  using BackwardFn = std::function<void(Tape&, size_t self)>;

  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Matrix value, bool requires_grad, BackwardFn backward);
  bool tracks(Var v) const { return nodes_[v.index].requires_grad; }
  const Matrix& out_grad(size_t self) const { return nodes_[self].grad; }
  // Lazily allocates the gradient buffer with the value's shape.
  Matrix& grad_buffer(Var v);
  void accumulate(Var v, const Matrix& g);

  std::vector<Node> nodes_;
};

}  // namespace elbert
