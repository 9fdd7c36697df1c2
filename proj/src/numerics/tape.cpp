#include "elbert/numerics/tape.h"

#include <cmath>
#include <stdexcept>
#include <string>

namespace elbert {

Tape::Var Tape::push(Matrix value, bool requires_grad, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Tape::Var Tape::constant(Matrix value) {
  return push(std::move(value), false, nullptr);
}

Tape::Var Tape::parameter(const Matrix& value) {
  Node node;
  node.external = &value;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_.at(v.index);
  return n.external != nullptr ? *n.external : n.value;
}

const Matrix& Tape::grad(Var v) const {
  return nodes_.at(v.index).grad;
}

Matrix& Tape::grad_buffer(Var v) {
  Node& n = nodes_[v.index];
  if (n.grad.empty()) {
    const Matrix& val = value(v);
    n.grad = Matrix(val.rows(), val.cols());
  }
  return n.grad;
}

void Tape::accumulate(Var v, const Matrix& g) {
  if (!tracks(v)) return;
  Matrix& buf = grad_buffer(v);
  require_same_shape(buf, g, "Tape gradient");
  auto dst = buf.data();
  auto src = g.data();
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

Tape::Var Tape::matmul(Var a, Var b) {
  return push(elbert::matmul(value(a), value(b)), tracks(a) || tracks(b),
              [a, b](Tape& t, size_t self) {
                const Matrix& g = t.out_grad(self);
                if (t.tracks(a)) {
                  t.accumulate(a, elbert::matmul_transposed(g, t.value(b)));
                }
                if (t.tracks(b)) {
                  t.accumulate(b, elbert::matmul(transpose(t.value(a)), g));
                }
              });
}

Tape::Var Tape::matmul_transposed(Var a, Var b) {
  return push(elbert::matmul_transposed(value(a), value(b)),
              tracks(a) || tracks(b), [a, b](Tape& t, size_t self) {
                const Matrix& g = t.out_grad(self);
                if (t.tracks(a)) t.accumulate(a, elbert::matmul(g, t.value(b)));
                if (t.tracks(b)) {
                  t.accumulate(b, elbert::matmul(transpose(g), t.value(a)));
                }
              });
}

Tape::Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "Tape::add");
  Matrix out = value(a);
  auto dst = out.data();
  auto src = value(b).data();
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  return push(std::move(out), tracks(a) || tracks(b),
              [a, b](Tape& t, size_t self) {
                const Matrix& g = t.out_grad(self);
                t.accumulate(a, g);
                t.accumulate(b, g);
              });
}

Tape::Var Tape::add_row(Var m, Var row) {
  Matrix out = value(m);
  add_row_inplace(out, value(row));
  return push(std::move(out), tracks(m) || tracks(row),
              [m, row](Tape& t, size_t self) {
                const Matrix& g = t.out_grad(self);
                t.accumulate(m, g);
                if (t.tracks(row)) {
                  Matrix& rg = t.grad_buffer(row);
                  for (size_t r = 0; r < g.rows(); ++r) {
                    for (size_t c = 0; c < g.cols(); ++c) rg(0, c) += g(r, c);
                  }
                }
              });
}

Tape::Var Tape::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "Tape::mul");
  Matrix out = value(a);
  auto dst = out.data();
  auto src = value(b).data();
  for (size_t i = 0; i < dst.size(); ++i) dst[i] *= src[i];
  return push(std::move(out), tracks(a) || tracks(b),
              [a, b](Tape& t, size_t self) {
                const Matrix& g = t.out_grad(self);
                if (t.tracks(a)) {
                  Matrix ga = g;
                  auto bv = t.value(b).data();
                  for (size_t i = 0; i < bv.size(); ++i) ga.data()[i] *= bv[i];
                  t.accumulate(a, ga);
                }
                if (t.tracks(b)) {
                  Matrix gb = g;
                  auto av = t.value(a).data();
                  for (size_t i = 0; i < av.size(); ++i) gb.data()[i] *= av[i];
                  t.accumulate(b, gb);
                }
              });
}

Tape::Var Tape::scale(Var a, double factor) { return affine(a, factor, 0.0); }

Tape::Var Tape::affine(Var a, double factor, double shift) {
  Matrix out = value(a);
  for (double& v : out.data()) v = v * factor + shift;
  return push(std::move(out), tracks(a), [a, factor](Tape& t, size_t self) {
    Matrix g = t.out_grad(self);
    for (double& v : g.data()) v *= factor;
    t.accumulate(a, g);
  });
}

Tape::Var Tape::gelu(Var a) {
  Matrix out = value(a);
  for (double& v : out.data()) v = elbert::gelu(v);
  return push(std::move(out), tracks(a), [a](Tape& t, size_t self) {
    Matrix g = t.out_grad(self);
    auto x = t.value(a).data();
    for (size_t i = 0; i < x.size(); ++i) g.data()[i] *= gelu_derivative(x[i]);
    t.accumulate(a, g);
  });
}

Tape::Var Tape::sigmoid(Var a) {
  Matrix out = value(a);
  for (double& v : out.data()) v = elbert::sigmoid(v);
  return push(std::move(out), tracks(a), [a](Tape& t, size_t self) {
    Matrix g = t.out_grad(self);
    auto y = t.nodes_[self].value.data();
    for (size_t i = 0; i < y.size(); ++i) g.data()[i] *= y[i] * (1.0 - y[i]);
    t.accumulate(a, g);
  });
}

Tape::Var Tape::softmax_rows(Var a) {
  return push(elbert::softmax_rows(value(a)), tracks(a),
              [a](Tape& t, size_t self) {
                const Matrix& g = t.out_grad(self);
                const Matrix& y = t.nodes_[self].value;
                Matrix gx(y.rows(), y.cols());
                for (size_t r = 0; r < y.rows(); ++r) {
                  double dot = 0.0;
                  for (size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
                  for (size_t c = 0; c < y.cols(); ++c) {
                    gx(r, c) = y(r, c) * (g(r, c) - dot);
                  }
                }
                t.accumulate(a, gx);
              });
}

Tape::Var Tape::layer_norm_rows(Var x, Var gain, Var bias, double eps) {
  Matrix out = value(x);
  layer_norm_rows_inplace(out, value(gain), value(bias), eps);
  return push(
      std::move(out), tracks(x) || tracks(gain) || tracks(bias),
      [x, gain, bias, eps](Tape& t, size_t self) {
        const Matrix& g = t.out_grad(self);
        const Matrix& in = t.value(x);
        const Matrix& gn = t.value(gain);
        const size_t n = in.cols();
        const double inv_n = 1.0 / static_cast<double>(n);
        Matrix gx(in.rows(), n);
        Matrix ggain(1, n);
        Matrix gbias(1, n);
        std::vector<double> xhat(n);
        std::vector<double> dxhat(n);
        for (size_t r = 0; r < in.rows(); ++r) {
          double mean = 0.0;
          for (size_t c = 0; c < n; ++c) mean += in(r, c);
          mean *= inv_n;
          double var = 0.0;
          for (size_t c = 0; c < n; ++c) {
            var += (in(r, c) - mean) * (in(r, c) - mean);
          }
          var *= inv_n;
          const double inv_std = 1.0 / std::sqrt(var + eps);
          double sum_d = 0.0;
          double sum_dx = 0.0;
          for (size_t c = 0; c < n; ++c) {
            xhat[c] = (in(r, c) - mean) * inv_std;
            dxhat[c] = g(r, c) * gn(0, c);
            sum_d += dxhat[c];
            sum_dx += dxhat[c] * xhat[c];
            ggain(0, c) += g(r, c) * xhat[c];
            gbias(0, c) += g(r, c);
          }
          for (size_t c = 0; c < n; ++c) {
            gx(r, c) = inv_std * inv_n *
                       (static_cast<double>(n) * dxhat[c] - sum_d -
                        xhat[c] * sum_dx);
          }
        }
        t.accumulate(x, gx);
        t.accumulate(gain, ggain);
        t.accumulate(bias, gbias);
      });
}

Tape::Var Tape::slice_cols(Var a, size_t begin, size_t count) {
  const Matrix& in = value(a);
  if (begin + count > in.cols()) {
    throw std::invalid_argument("Tape::slice_cols: range out of bounds");
  }
  Matrix out(in.rows(), count);
  for (size_t r = 0; r < in.rows(); ++r) {
    for (size_t c = 0; c < count; ++c) out(r, c) = in(r, begin + c);
  }
  return push(std::move(out), tracks(a), [a, begin](Tape& t, size_t self) {
    const Matrix& g = t.out_grad(self);
    Matrix& ga = t.grad_buffer(a);
    for (size_t r = 0; r < g.rows(); ++r) {
      for (size_t c = 0; c < g.cols(); ++c) ga(r, begin + c) += g(r, c);
    }
  });
}

Tape::Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("Tape::concat_cols: empty");
  const size_t rows = value(parts[0]).rows();
  size_t cols = 0;
  bool any = false;
  for (Var p : parts) {
    if (value(p).rows() != rows) {
      throw std::invalid_argument("Tape::concat_cols: row mismatch");
    }
    cols += value(p).cols();
    any = any || tracks(p);
  }
  Matrix out(rows, cols);
  size_t offset = 0;
  for (Var p : parts) {
    const Matrix& v = value(p);
    for (size_t r = 0; r < rows; ++r) {
      for (size_t c = 0; c < v.cols(); ++c) out(r, offset + c) = v(r, c);
    }
    offset += v.cols();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return push(std::move(out), any, [saved](Tape& t, size_t self) {
    const Matrix& g = t.out_grad(self);
    size_t off = 0;
    for (Var p : saved) {
      const size_t width = t.value(p).cols();
      if (t.tracks(p)) {
        Matrix& gp = t.grad_buffer(p);
        for (size_t r = 0; r < g.rows(); ++r) {
          for (size_t c = 0; c < width; ++c) gp(r, c) += g(r, off + c);
        }
      }
      off += width;
    }
  });
}

Tape::Var Tape::row(Var a, size_t r) {
  const Matrix& in = value(a);
  if (r >= in.rows()) throw std::invalid_argument("Tape::row: out of range");
  return push(Matrix::row_vector(in.row(r)), tracks(a),
              [a, r](Tape& t, size_t self) {
                const Matrix& g = t.out_grad(self);
                Matrix& ga = t.grad_buffer(a);
                for (size_t c = 0; c < g.cols(); ++c) ga(r, c) += g(0, c);
              });
}

Tape::Var Tape::element(Var a, size_t r, size_t c) {
  const Matrix& in = value(a);
  if (r >= in.rows() || c >= in.cols()) {
    throw std::invalid_argument("Tape::element: out of range");
  }
  return push(Matrix(1, 1, in(r, c)), tracks(a),
              [a, r, c](Tape& t, size_t self) {
                t.grad_buffer(a)(r, c) += t.out_grad(self)(0, 0);
              });
}

Tape::Var Tape::sum(Var a) {
  double total = 0.0;
  for (double v : value(a).data()) total += v;
  return push(Matrix(1, 1, total), tracks(a), [a](Tape& t, size_t self) {
    const double g = t.out_grad(self)(0, 0);
    for (double& v : t.grad_buffer(a).data()) v += g;
  });
}

Tape::Var Tape::gather_rows(Var table, std::span<const size_t> ids) {
  const Matrix& tab = value(table);
  Matrix out(ids.size(), tab.cols());
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= tab.rows()) {
      throw std::invalid_argument("Tape::gather_rows: id " +
                                  std::to_string(ids[i]) + " out of range");
    }
    auto src = tab.row(ids[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  std::vector<size_t> saved(ids.begin(), ids.end());
  return push(std::move(out), tracks(table),
              [table, saved](Tape& t, size_t self) {
                const Matrix& g = t.out_grad(self);
                Matrix& gt = t.grad_buffer(table);
                for (size_t i = 0; i < saved.size(); ++i) {
                  for (size_t c = 0; c < g.cols(); ++c) {
                    gt(saved[i], c) += g(i, c);
                  }
                }
              });
}

Tape::Var Tape::cross_entropy(Var probs, size_t label) {
  const Matrix& p = value(probs);
  if (p.rows() != 1) {
    throw std::invalid_argument("Tape::cross_entropy: expected a 1xC row");
  }
  const double loss = elbert::cross_entropy(p.row(0), label);
  return push(Matrix(1, 1, loss), tracks(probs),
              [probs, label](Tape& t, size_t self) {
                const double pl = t.value(probs)(0, label);
                if (pl < kProbabilityClamp) return;
                t.grad_buffer(probs)(0, label) -= t.out_grad(self)(0, 0) / pl;
              });
}

void Tape::backward(Var root) {
  const Matrix& rv = value(root);
  if (rv.rows() != 1 || rv.cols() != 1) {
    throw std::invalid_argument("Tape::backward: root must be 1x1, got " +
                                rv.shape_string());
  }
  if (!tracks(root)) return;
  grad_buffer(root)(0, 0) += 1.0;
  for (size_t i = root.index + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, i);
  }
}

}  // namespace elbert
