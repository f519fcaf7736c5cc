#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "facet/error.hpp"
#include "facet/rng.hpp"

namespace facet {

namespace detail {

/// One node of the computation graph. Values are written once at
/// construction; `grad` is the accumulator for leaves and is only touched
/// by `backward`. Non-leaf gradients live in transient buffers inside a
/// single backward pass, so repeated backward calls accumulate correctly.
template <typename S>
struct TensorNode {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<S> values;
  std::vector<S> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // pgrads[i] is null when parents[i] needs no gradient.
  std::function<void(const TensorNode& self, const std::vector<S>& gout,
                     const std::vector<std::vector<S>*>& pgrads)>
      backward_fn;

  bool leaf() const { return parents.empty(); }
  std::size_t size() const { return rows * cols; }
};

}  // namespace detail

/// Dense row-major matrix with reverse-mode differentiation, templated on
/// the scalar type. `Tensor` (float) is the production instantiation;
/// the double instantiation exists for high-precision cross-checks.
template <typename S>
class TensorT {
 public:
  using Node = detail::TensorNode<S>;

  TensorT() : node_(std::make_shared<Node>()) {}

  TensorT(std::size_t rows, std::size_t cols, std::vector<S> values,
          bool requires_grad = false)
      : node_(std::make_shared<Node>()) {
    if (values.size() != rows * cols) {
      throw DimensionError("tensor: " + std::to_string(rows) + "x" +
                           std::to_string(cols) + " shape needs " +
                           std::to_string(rows * cols) + " values, got " +
                           std::to_string(values.size()));
    }
    node_->rows = rows;
    node_->cols = cols;
    node_->values = std::move(values);
    node_->requires_grad = requires_grad;
  }

  explicit TensorT(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static TensorT zeros(std::size_t rows, std::size_t cols,
                       bool requires_grad = false) {
    return TensorT(rows, cols, std::vector<S>(rows * cols, S(0)),
                   requires_grad);
  }

  static TensorT full(std::size_t rows, std::size_t cols, S value,
                      bool requires_grad = false) {
    return TensorT(rows, cols, std::vector<S>(rows * cols, value),
                   requires_grad);
  }

  static TensorT scalar(S value, bool requires_grad = false) {
    return TensorT(1, 1, std::vector<S>{value}, requires_grad);
  }

  static TensorT row(std::vector<S> values, bool requires_grad = false) {
    std::size_t n = values.size();
    return TensorT(1, n, std::move(values), requires_grad);
  }

  std::size_t rows() const { return node_->rows; }
  std::size_t cols() const { return node_->cols; }
  std::size_t size() const { return node_->size(); }
  bool requires_grad() const { return node_->requires_grad; }

  const std::vector<S>& values() const { return node_->values; }
  std::vector<S>& values() { return node_->values; }

  S at(std::size_t r, std::size_t c) const {
    return node_->values[r * cols() + c];
  }

  /// Scalar payload of a 1x1 tensor.
  S item() const {
    if (size() != 1) {
      throw UsageError("item: tensor is " + shape_str() + ", not scalar");
    }
    return node_->values[0];
  }

  /// Accumulated gradient of a leaf. Zero-filled if backward never reached it.
  const std::vector<S>& grad() const {
    if (node_->grad.empty()) node_->grad.assign(size(), S(0));
    return node_->grad;
  }

  S grad_at(std::size_t r, std::size_t c) const {
    return grad()[r * cols() + c];
  }

  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), S(0));
  }

  std::string shape_str() const {
    return std::to_string(rows()) + "x" + std::to_string(cols());
  }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  mutable std::shared_ptr<Node> node_;
};

using Tensor = TensorT<float>;

namespace detail {

template <typename S>
std::shared_ptr<TensorNode<S>> make_op_node(
    std::size_t rows, std::size_t cols,
    std::vector<std::shared_ptr<TensorNode<S>>> parents) {
  auto node = std::make_shared<TensorNode<S>>();
  node->rows = rows;
  node->cols = cols;
  node->values.resize(rows * cols);
  node->parents = std::move(parents);
  for (const auto& p : node->parents) {
    if (p->requires_grad) {
      node->requires_grad = true;
      break;
    }
  }
  return node;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and structural operations
// ---------------------------------------------------------------------------

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("add: " + a.shape_str() + " vs " + b.shape_str());
  }
  auto node = detail::make_op_node<S>(a.rows(), a.cols(), {a.node(), b.node()});
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < node->values.size(); ++i) node->values[i] = av[i] + bv[i];
  node->backward_fn = [](const auto& self, const std::vector<S>& g,
                         const std::vector<std::vector<S>*>& pg) {
    for (int p = 0; p < 2; ++p) {
      if (!pg[p]) continue;
      auto& dst = *pg[p];
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }
  };
  return TensorT<S>(node);
}

template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("sub: " + a.shape_str() + " vs " + b.shape_str());
  }
  auto node = detail::make_op_node<S>(a.rows(), a.cols(), {a.node(), b.node()});
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < node->values.size(); ++i) node->values[i] = av[i] - bv[i];
  node->backward_fn = [](const auto& self, const std::vector<S>& g,
                         const std::vector<std::vector<S>*>& pg) {
    if (pg[0]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
    }
    if (pg[1]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] -= g[i];
    }
  };
  return TensorT<S>(node);
}

template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("mul: " + a.shape_str() + " vs " + b.shape_str());
  }
  auto node = detail::make_op_node<S>(a.rows(), a.cols(), {a.node(), b.node()});
  const auto& av = a.values();
  const auto& bv = b.values();
  for (std::size_t i = 0; i < node->values.size(); ++i) node->values[i] = av[i] * bv[i];
  node->backward_fn = [](const auto& self, const std::vector<S>& g,
                         const std::vector<std::vector<S>*>& pg) {
    const auto& av = self.parents[0]->values;
    const auto& bv = self.parents[1]->values;
    if (pg[0]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * bv[i];
    }
    if (pg[1]) {
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[1])[i] += g[i] * av[i];
    }
  };
  return TensorT<S>(node);
}

/// y = k * x + c, elementwise with scalar constants.
template <typename S>
TensorT<S> affine(const TensorT<S>& x, S k, S c) {
  auto node = detail::make_op_node<S>(x.rows(), x.cols(), {x.node()});
  const auto& xv = x.values();
  for (std::size_t i = 0; i < node->values.size(); ++i) node->values[i] = k * xv[i] + c;
  node->backward_fn = [k](const auto& self, const std::vector<S>& g,
                          const std::vector<std::vector<S>*>& pg) {
    if (!pg[0]) return;
    auto& dst = *pg[0];
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += k * g[i];
  };
  return TensorT<S>(node);
}

template <typename S>
TensorT<S> scale(const TensorT<S>& x, S k) {
  return affine(x, k, S(0));
}

/// Sum of all entries, as a 1x1 tensor. Accumulates in double.
template <typename S>
TensorT<S> sum(const TensorT<S>& x) {
  auto node = detail::make_op_node<S>(1, 1, {x.node()});
  double acc = 0.0;
  for (S v : x.values()) acc += static_cast<double>(v);
  node->values[0] = static_cast<S>(acc);
  node->backward_fn = [](const auto& self, const std::vector<S>& g,
                         const std::vector<std::vector<S>*>& pg) {
    if (!pg[0]) return;
    auto& dst = *pg[0];
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[0];
  };
  return TensorT<S>(node);
}

// ---------------------------------------------------------------------------
// Matrix operations
// ---------------------------------------------------------------------------

namespace detail {

// dst += a (r x k) * b (k x c)
template <typename S>
void matmul_acc(const std::vector<S>& a, const std::vector<S>& b, std::vector<S>& dst,
                std::size_t r, std::size_t k, std::size_t c, bool assign) {
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double acc = 0.0;
      const S* arow = a.data() + i * k;
      for (std::size_t t = 0; t < k; ++t) {
        acc += static_cast<double>(arow[t]) * static_cast<double>(b[t * c + j]);
      }
      if (assign) {
        dst[i * c + j] = static_cast<S>(acc);
      } else {
        dst[i * c + j] += static_cast<S>(acc);
      }
    }
  }
}

// dst += a (r x k) * b^T where b is (c x k)
template <typename S>
void matmul_nt_acc(const std::vector<S>& a, const std::vector<S>& b, std::vector<S>& dst,
                   std::size_t r, std::size_t k, std::size_t c, bool assign) {
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      double acc = 0.0;
      const S* arow = a.data() + i * k;
      const S* brow = b.data() + j * k;
      for (std::size_t t = 0; t < k; ++t) {
        acc += static_cast<double>(arow[t]) * static_cast<double>(brow[t]);
      }
      if (assign) {
        dst[i * c + j] = static_cast<S>(acc);
      } else {
        dst[i * c + j] += static_cast<S>(acc);
      }
    }
  }
}

// dst += a^T (k x r input) * b (k x c)  -> r x c
template <typename S>
void matmul_tn_acc(const std::vector<S>& a, const std::vector<S>& b, std::vector<S>& dst,
                   std::size_t r, std::size_t k, std::size_t c, bool assign) {
  if (assign) std::fill(dst.begin(), dst.end(), S(0));
  // accumulate in double per output element
  std::vector<double> acc(r * c, 0.0);
  for (std::size_t t = 0; t < k; ++t) {
    const S* arow = a.data() + t * r;
    const S* brow = b.data() + t * c;
    for (std::size_t i = 0; i < r; ++i) {
      double av = static_cast<double>(arow[i]);
      for (std::size_t j = 0; j < c; ++j) {
        acc[i * c + j] += av * static_cast<double>(brow[j]);
      }
    }
  }
  for (std::size_t i = 0; i < r * c; ++i) dst[i] += static_cast<S>(acc[i]);
}

}  // namespace detail

/// Standard matrix product a (n x k) * b (k x m).
template <typename S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree, " + a.shape_str() +
                         " x " + b.shape_str());
  }
  auto node = detail::make_op_node<S>(a.rows(), b.cols(), {a.node(), b.node()});
  detail::matmul_acc(a.values(), b.values(), node->values, a.rows(), a.cols(),
                     b.cols(), true);
  node->backward_fn = [](const auto& self, const std::vector<S>& g,
                         const std::vector<std::vector<S>*>& pg) {
    const auto& an = *self.parents[0];
    const auto& bn = *self.parents[1];
    // dA = G * B^T ; dB = A^T * G
    if (pg[0]) detail::matmul_nt_acc(g, bn.values, *pg[0], an.rows, bn.cols, an.cols, false);
    if (pg[1]) detail::matmul_tn_acc(an.values, g, *pg[1], an.cols, an.rows, bn.cols, false);
  };
  return TensorT<S>(node);
}

/// a (n x k) * b^T for b (m x k); the attention-score shortcut.
template <typename S>
TensorT<S> matmul_nt(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: inner dimensions disagree, " +
                         a.shape_str() + " x " + b.shape_str() + "^T");
  }
  auto node = detail::make_op_node<S>(a.rows(), b.rows(), {a.node(), b.node()});
  detail::matmul_nt_acc(a.values(), b.values(), node->values, a.rows(), a.cols(),
                        b.rows(), true);
  node->backward_fn = [](const auto& self, const std::vector<S>& g,
                         const std::vector<std::vector<S>*>& pg) {
    const auto& an = *self.parents[0];
    const auto& bn = *self.parents[1];
    // y = A B^T: dA = G * B ; dB = G^T * A
    if (pg[0]) detail::matmul_acc(g, bn.values, *pg[0], an.rows, bn.rows, an.cols, false);
    if (pg[1]) detail::matmul_tn_acc(g, an.values, *pg[1], bn.rows, an.rows, an.cols, false);
  };
  return TensorT<S>(node);
}

template <typename S>
TensorT<S> transpose(const TensorT<S>& x) {
  auto node = detail::make_op_node<S>(x.cols(), x.rows(), {x.node()});
  const auto& xv = x.values();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      node->values[c * x.rows() + r] = xv[r * x.cols() + c];
    }
  }
  node->backward_fn = [](const auto& self, const std::vector<S>& g,
                         const std::vector<std::vector<S>*>& pg) {
    if (!pg[0]) return;
    auto& dst = *pg[0];
    std::size_t rows = self.rows, cols = self.cols;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        dst[c * rows + r] += g[r * cols + c];
      }
    }
  };
  return TensorT<S>(node);
}

/// Vertical stack; all parts must share a column count.
template <typename S>
TensorT<S> concat_rows(const std::vector<TensorT<S>>& parts) {
  if (parts.empty()) throw UsageError("concat_rows: empty part list");
  std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  std::vector<std::shared_ptr<detail::TensorNode<S>>> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw DimensionError("concat_rows: column mismatch, " + p.shape_str() +
                           " vs " + parts[0].shape_str());
    }
    rows += p.rows();
    parents.push_back(p.node());
  }
  auto node = detail::make_op_node<S>(rows, cols, std::move(parents));
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.values().begin(), p.values().end(), node->values.begin() + offset);
    offset += p.size();
  }
  node->backward_fn = [](const auto& self, const std::vector<S>& g,
                         const std::vector<std::vector<S>*>& pg) {
    std::size_t offset = 0;
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      std::size_t n = self.parents[p]->size();
      if (pg[p]) {
        auto& dst = *pg[p];
        for (std::size_t i = 0; i < n; ++i) dst[i] += g[offset + i];
      }
      offset += n;
    }
  };
  return TensorT<S>(node);
}

/// Horizontal stack; all parts must share a row count.
template <typename S>
TensorT<S> concat_cols(const std::vector<TensorT<S>>& parts) {
  if (parts.empty()) throw UsageError("concat_cols: empty part list");
  std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  std::vector<std::shared_ptr<detail::TensorNode<S>>> parents;
  parents.reserve(parts.size());
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row mismatch, " + p.shape_str() +
                           " vs " + parts[0].shape_str());
    }
    cols += p.cols();
    parents.push_back(p.node());
  }
  auto node = detail::make_op_node<S>(rows, cols, std::move(parents));
  std::size_t col_offset = 0;
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy(p.values().begin() + r * p.cols(),
                p.values().begin() + (r + 1) * p.cols(),
                node->values.begin() + r * cols + col_offset);
    }
    col_offset += p.cols();
  }
  node->backward_fn = [cols](const auto& self, const std::vector<S>& g,
                             const std::vector<std::vector<S>*>& pg) {
    std::size_t col_offset = 0;
    for (std::size_t p = 0; p < self.parents.size(); ++p) {
      std::size_t pcols = self.parents[p]->cols;
      if (pg[p]) {
        auto& dst = *pg[p];
        for (std::size_t r = 0; r < self.rows; ++r) {
          for (std::size_t c = 0; c < pcols; ++c) {
            dst[r * pcols + c] += g[r * cols + col_offset + c];
          }
        }
      }
      col_offset += pcols;
    }
  };
  return TensorT<S>(node);
}

/// Broadcast a 1 x C row to n x C.
template <typename S>
TensorT<S> repeat_rows(const TensorT<S>& x, std::size_t n) {
  if (x.rows() != 1) {
    throw DimensionError("repeat_rows: expected a single row, got " + x.shape_str());
  }
  auto node = detail::make_op_node<S>(n, x.cols(), {x.node()});
  for (std::size_t r = 0; r < n; ++r) {
    std::copy(x.values().begin(), x.values().end(),
              node->values.begin() + r * x.cols());
  }
  node->backward_fn = [](const auto& self, const std::vector<S>& g,
                         const std::vector<std::vector<S>*>& pg) {
    if (!pg[0]) return;
    auto& dst = *pg[0];
    for (std::size_t c = 0; c < self.cols; ++c) {
      double acc = 0.0;
      for (std::size_t r = 0; r < self.rows; ++r) {
        acc += static_cast<double>(g[r * self.cols + c]);
      }
      dst[c] += static_cast<S>(acc);
    }
  };
  return TensorT<S>(node);
}

/// Add a 1 x C bias row to every row of x.
template <typename S>
TensorT<S> add_rowvec(const TensorT<S>& x, const TensorT<S>& b) {
  if (b.rows() != 1 || b.cols() != x.cols()) {
    throw DimensionError("add_rowvec: " + x.shape_str() + " + " + b.shape_str());
  }
  auto node = detail::make_op_node<S>(x.rows(), x.cols(), {x.node(), b.node()});
  const auto& xv = x.values();
  const auto& bv = b.values();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      node->values[r * x.cols() + c] = xv[r * x.cols() + c] + bv[c];
    }
  }
  node->backward_fn = [](const auto& self, const std::vector<S>& g,
                         const std::vector<std::vector<S>*>& pg) {
    if (pg[0]) {
      auto& dst = *pg[0];
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
    }
    if (pg[1]) {
      auto& dst = *pg[1];
      for (std::size_t c = 0; c < self.cols; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < self.rows; ++r) {
          acc += static_cast<double>(g[r * self.cols + c]);
        }
        dst[c] += static_cast<S>(acc);
      }
    }
  };
  return TensorT<S>(node);
}

/// Column j of x as an n x 1 tensor.
template <typename S>
TensorT<S> select_col(const TensorT<S>& x, std::size_t j) {
  if (j >= x.cols()) {
    throw UsageError("select_col: column " + std::to_string(j) +
                     " out of range for " + x.shape_str());
  }
  auto node = detail::make_op_node<S>(x.rows(), 1, {x.node()});
  for (std::size_t r = 0; r < x.rows(); ++r) node->values[r] = x.at(r, j);
  node->backward_fn = [j](const auto& self, const std::vector<S>& g,
                          const std::vector<std::vector<S>*>& pg) {
    if (!pg[0]) return;
    auto& dst = *pg[0];
    std::size_t cols = self.parents[0]->cols;
    for (std::size_t r = 0; r < self.rows; ++r) dst[r * cols + j] += g[r];
  };
  return TensorT<S>(node);
}

// ---------------------------------------------------------------------------
// Neural building blocks
// ---------------------------------------------------------------------------

/// Row-wise softmax of logits / sqrt(scale_dim).
template <typename S>
TensorT<S> scaled_softmax(const TensorT<S>& logits, std::size_t scale_dim) {
  if (scale_dim == 0) throw UsageError("scaled_softmax: scale_dim must be positive");
  for (S v : logits.values()) {
    if (!std::isfinite(static_cast<double>(v))) {
      throw NumericError("scaled_softmax: non-finite input");
    }
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(scale_dim));
  auto node = detail::make_op_node<S>(logits.rows(), logits.cols(), {logits.node()});
  const auto& xv = logits.values();
  std::size_t cols = logits.cols();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const S* in = xv.data() + r * cols;
    S* out = node->values.data() + r * cols;
    double mx = -1e300;
    for (std::size_t c = 0; c < cols; ++c) {
      mx = std::max(mx, static_cast<double>(in[c]) * inv_sqrt_d);
    }
    double denom = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      double e = std::exp(static_cast<double>(in[c]) * inv_sqrt_d - mx);
      out[c] = static_cast<S>(e);
      denom += e;
    }
    for (std::size_t c = 0; c < cols; ++c) {
      out[c] = static_cast<S>(static_cast<double>(out[c]) / denom);
    }
  }
  node->backward_fn = [inv_sqrt_d](const auto& self, const std::vector<S>& g,
                                   const std::vector<std::vector<S>*>& pg) {
    if (!pg[0]) return;
    auto& dst = *pg[0];
    std::size_t cols = self.cols;
    for (std::size_t r = 0; r < self.rows; ++r) {
      const S* y = self.values.data() + r * cols;
      const S* gr = g.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        dot += static_cast<double>(gr[c]) * static_cast<double>(y[c]);
      }
      for (std::size_t c = 0; c < cols; ++c) {
        dst[r * cols + c] += static_cast<S>(
            static_cast<double>(y[c]) * (static_cast<double>(gr[c]) - dot) * inv_sqrt_d);
      }
    }
  };
  return TensorT<S>(node);
}

/// Per-row standardization with affine gamma/beta (both 1 x C, learnable).
template <typename S>
TensorT<S> layer_norm(const TensorT<S>& x, const TensorT<S>& gamma,
                      const TensorT<S>& beta, S epsilon) {
  if (gamma.rows() != 1 || gamma.cols() != x.cols() || beta.rows() != 1 ||
      beta.cols() != x.cols()) {
    throw DimensionError("layer_norm: params " + gamma.shape_str() + "/" +
                         beta.shape_str() + " vs input " + x.shape_str());
  }
  if (!(epsilon > S(0))) throw UsageError("layer_norm: epsilon must be positive");
  std::size_t rows = x.rows(), cols = x.cols();
  auto node = detail::make_op_node<S>(rows, cols, {x.node(), gamma.node(), beta.node()});
  std::vector<S> xhat(rows * cols);
  std::vector<S> inv_std(rows);
  const auto& xv = x.values();
  const auto& gv = gamma.values();
  const auto& bv = beta.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const S* in = xv.data() + r * cols;
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += static_cast<double>(in[c]);
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      double d = static_cast<double>(in[c]) - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    double istd = 1.0 / std::sqrt(var + static_cast<double>(epsilon));
    inv_std[r] = static_cast<S>(istd);
    for (std::size_t c = 0; c < cols; ++c) {
      S xh = static_cast<S>((static_cast<double>(in[c]) - mean) * istd);
      xhat[r * cols + c] = xh;
      node->values[r * cols + c] = gv[c] * xh + bv[c];
    }
  }
  node->backward_fn = [xhat = std::move(xhat), inv_std = std::move(inv_std)](
                          const auto& self, const std::vector<S>& g,
                          const std::vector<std::vector<S>*>& pg) {
    std::size_t rows = self.rows, cols = self.cols;
    const auto& gv = self.parents[1]->values;
    if (pg[0]) {
      auto& dx = *pg[0];
      for (std::size_t r = 0; r < rows; ++r) {
        double sum_gy = 0.0, sum_gy_xhat = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          double gy = static_cast<double>(g[r * cols + c]) * static_cast<double>(gv[c]);
          sum_gy += gy;
          sum_gy_xhat += gy * static_cast<double>(xhat[r * cols + c]);
        }
        double n = static_cast<double>(cols);
        for (std::size_t c = 0; c < cols; ++c) {
          double gy = static_cast<double>(g[r * cols + c]) * static_cast<double>(gv[c]);
          double xh = static_cast<double>(xhat[r * cols + c]);
          dx[r * cols + c] += static_cast<S>(
              static_cast<double>(inv_std[r]) *
              (gy - sum_gy / n - xh * sum_gy_xhat / n));
        }
      }
    }
    if (pg[1]) {
      auto& dgamma = *pg[1];
      for (std::size_t c = 0; c < cols; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
          acc += static_cast<double>(g[r * cols + c]) *
                 static_cast<double>(xhat[r * cols + c]);
        }
        dgamma[c] += static_cast<S>(acc);
      }
    }
    if (pg[2]) {
      auto& dbeta = *pg[2];
      for (std::size_t c = 0; c < cols; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
          acc += static_cast<double>(g[r * cols + c]);
        }
        dbeta[c] += static_cast<S>(acc);
      }
    }
  };
  return TensorT<S>(node);
}

/// Inverted dropout. In eval mode (or ratio 0) the input tensor is returned
/// unchanged, bit for bit.
template <typename S>
TensorT<S> dropout(const TensorT<S>& x, S ratio, bool training, Rng* rng) {
  if (!(ratio >= S(0)) || ratio >= S(1)) {
    throw UsageError("dropout: ratio must be in [0, 1)");
  }
  if (!training || ratio == S(0)) return x;
  if (rng == nullptr) throw UsageError("dropout: training mode needs an rng stream");
  const S keep_scale = S(1) / (S(1) - ratio);
  auto node = detail::make_op_node<S>(x.rows(), x.cols(), {x.node()});
  std::vector<S> mask(x.size());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = (rng->uniform() < static_cast<double>(ratio)) ? S(0) : keep_scale;
    node->values[i] = xv[i] * mask[i];
  }
  node->backward_fn = [mask = std::move(mask)](const auto& self, const std::vector<S>& g,
                                               const std::vector<std::vector<S>*>& pg) {
    if (!pg[0]) return;
    auto& dst = *pg[0];
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * mask[i];
  };
  return TensorT<S>(node);
}

/// PReLU with a single learnable slope (1x1 tensor).
template <typename S>
TensorT<S> prelu(const TensorT<S>& x, const TensorT<S>& slope) {
  if (slope.size() != 1) {
    throw DimensionError("prelu: slope must be 1x1, got " + slope.shape_str());
  }
  auto node = detail::make_op_node<S>(x.rows(), x.cols(), {x.node(), slope.node()});
  const auto& xv = x.values();
  const S s = slope.values()[0];
  for (std::size_t i = 0; i < xv.size(); ++i) {
    node->values[i] = xv[i] >= S(0) ? xv[i] : s * xv[i];
  }
  node->backward_fn = [](const auto& self, const std::vector<S>& g,
                         const std::vector<std::vector<S>*>& pg) {
    const auto& xv = self.parents[0]->values;
    const S s = self.parents[1]->values[0];
    if (pg[0]) {
      auto& dst = *pg[0];
      for (std::size_t i = 0; i < g.size(); ++i) {
        dst[i] += xv[i] >= S(0) ? g[i] : s * g[i];
      }
    }
    if (pg[1]) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (xv[i] < S(0)) acc += static_cast<double>(g[i]) * static_cast<double>(xv[i]);
      }
      (*pg[1])[0] += static_cast<S>(acc);
    }
  };
  return TensorT<S>(node);
}

/// Rows scaled to unit L2 norm. Zero rows are a numeric error.
template <typename S>
TensorT<S> l2_normalize_rows(const TensorT<S>& x) {
  std::size_t rows = x.rows(), cols = x.cols();
  auto node = detail::make_op_node<S>(rows, cols, {x.node()});
  std::vector<S> inv_norm(rows);
  const auto& xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    double nsq = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      double v = static_cast<double>(xv[r * cols + c]);
      nsq += v * v;
    }
    if (nsq < 1e-24) throw NumericError("l2_normalize_rows: zero-norm row");
    double inv = 1.0 / std::sqrt(nsq);
    inv_norm[r] = static_cast<S>(inv);
    for (std::size_t c = 0; c < cols; ++c) {
      node->values[r * cols + c] = static_cast<S>(static_cast<double>(xv[r * cols + c]) * inv);
    }
  }
  node->backward_fn = [inv_norm = std::move(inv_norm)](
                          const auto& self, const std::vector<S>& g,
                          const std::vector<std::vector<S>*>& pg) {
    if (!pg[0]) return;
    auto& dst = *pg[0];
    std::size_t cols = self.cols;
    for (std::size_t r = 0; r < self.rows; ++r) {
      const S* y = self.values.data() + r * cols;
      const S* gr = g.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        dot += static_cast<double>(gr[c]) * static_cast<double>(y[c]);
      }
      for (std::size_t c = 0; c < cols; ++c) {
        dst[r * cols + c] += static_cast<S>(
            (static_cast<double>(gr[c]) - static_cast<double>(y[c]) * dot) *
            static_cast<double>(inv_norm[r]));
      }
    }
  };
  return TensorT<S>(node);
}

// ---------------------------------------------------------------------------
// Reverse-mode pass
// ---------------------------------------------------------------------------

/// Propagate gradients from a scalar loss to every reachable leaf that
/// requires one. Leaf gradients accumulate across calls; intermediate
/// gradients live only inside this pass.
template <typename S>
void backward(const TensorT<S>& loss) {
  using Node = detail::TensorNode<S>;
  if (loss.size() != 1) {
    throw UsageError("backward: loss must be scalar, got " + loss.shape_str());
  }
  Node* root = loss.node().get();
  if (!root->requires_grad) return;

  // Post-order over the requires_grad subgraph, iterative.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  std::unordered_map<Node*, std::vector<S>> buffers;
  buffers.reserve(order.size());
  buffers[root] = std::vector<S>{S(1)};

  // order is post-order, so reverse iteration visits consumers before
  // producers; each node's buffer is complete when we reach it.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    auto found = buffers.find(node);
    if (found == buffers.end()) continue;
    if (node->backward_fn) {
      std::vector<std::vector<S>*> pgrads(node->parents.size(), nullptr);
      for (std::size_t i = 0; i < node->parents.size(); ++i) {
        Node* parent = node->parents[i].get();
        if (!parent->requires_grad) continue;
        auto [slot, inserted] = buffers.try_emplace(parent);
        if (inserted) slot->second.assign(parent->size(), S(0));
        pgrads[i] = &slot->second;
      }
      node->backward_fn(*node, found->second, pgrads);
    }
    if (node->leaf()) {
      if (node->grad.empty()) node->grad.assign(node->size(), S(0));
      const auto& buf = found->second;
      for (std::size_t i = 0; i < buf.size(); ++i) node->grad[i] += buf[i];
    }
    buffers.erase(found);
  }
}

// ---------------------------------------------------------------------------
// Numeric gradient checking
// ---------------------------------------------------------------------------

namespace detail {

template <typename S>
double relative_error(double analytic, double numeric) {
  double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace detail

/// Max relative error between analytic gradients and central differences,
/// taken over every coordinate of every checked tensor. `f` must rebuild
/// its graph from the tensors' current values on each call.
template <typename S, typename F>
double grad_check(F&& f, const std::vector<TensorT<S>*>& params, double eps) {
  if (!(eps > 0)) throw UsageError("grad_check: eps must be positive");
  for (auto* t : params) t->zero_grad();
  TensorT<S> loss = f();
  backward(loss);
  std::vector<std::vector<S>> analytic;
  analytic.reserve(params.size());
  for (auto* t : params) {
    analytic.push_back(t->grad());
    t->zero_grad();
  }

  double max_rel = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& vals = params[p]->values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const S orig = vals[i];
      double h = eps * std::max(1.0, std::abs(static_cast<double>(orig)));
      // round the step through S so the actual perturbation is representable
      S plus = static_cast<S>(static_cast<double>(orig) + h);
      S minus = static_cast<S>(static_cast<double>(orig) - h);
      vals[i] = plus;
      double f_plus = static_cast<double>(f().item());
      vals[i] = minus;
      double f_minus = static_cast<double>(f().item());
      vals[i] = orig;
      double denom = static_cast<double>(plus) - static_cast<double>(minus);
      double numeric = (f_plus - f_minus) / denom;
      max_rel = std::max(max_rel, detail::relative_error<S>(
                                      static_cast<double>(analytic[p][i]), numeric));
    }
  }
  return max_rel;
}

/// Single-tensor convenience form.
template <typename S, typename F>
double grad_check(F&& f, TensorT<S>& x, double eps) {
  std::vector<TensorT<S>*> params{&x};
  return grad_check(std::forward<F>(f), params, eps);
}

}  // namespace facet
