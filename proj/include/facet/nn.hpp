#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "facet/rng.hpp"
#include "facet/tensor.hpp"

namespace facet {

/// Xavier-uniform fill in +-sqrt(6 / (fan_in + fan_out)).
template <typename S>
void fill_xavier_uniform(TensorT<S>& w, Rng& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (auto& v : w.values()) {
    v = static_cast<S>(rng.uniform_range(-limit, limit));
  }
}

/// Weights of one multi-head attention block: per-head projections for
/// query/key/value plus the shared output projection. Query and key share
/// the projected dimension so their dot products are well-defined.
template <typename S>
struct AttentionParamsT {
  std::size_t heads = 0;
  std::size_t query_dim = 0, key_dim = 0, value_dim = 0;
  std::size_t head_qk_dim = 0, head_v_dim = 0;
  std::size_t out_dim = 0;
  std::vector<TensorT<S>> wq, wk, wv;  // one entry per head
  TensorT<S> wo;                        // (heads * head_v_dim) x out_dim
};

template <typename S>
AttentionParamsT<S> make_attention_params(std::size_t heads, std::size_t query_dim,
                                          std::size_t key_dim, std::size_t value_dim,
                                          std::size_t head_qk_dim, std::size_t head_v_dim,
                                          std::size_t out_dim, Rng& rng) {
  if (heads == 0 || head_qk_dim == 0 || head_v_dim == 0) {
    throw ConfigError("attention: heads and head dims must be positive");
  }
  AttentionParamsT<S> p;
  p.heads = heads;
  p.query_dim = query_dim;
  p.key_dim = key_dim;
  p.value_dim = value_dim;
  p.head_qk_dim = head_qk_dim;
  p.head_v_dim = head_v_dim;
  p.out_dim = out_dim;
  p.wq.reserve(heads);
  p.wk.reserve(heads);
  p.wv.reserve(heads);
  for (std::size_t i = 0; i < heads; ++i) {
    p.wq.push_back(TensorT<S>::zeros(query_dim, head_qk_dim, true));
    fill_xavier_uniform(p.wq.back(), rng);
    p.wk.push_back(TensorT<S>::zeros(key_dim, head_qk_dim, true));
    fill_xavier_uniform(p.wk.back(), rng);
    p.wv.push_back(TensorT<S>::zeros(value_dim, head_v_dim, true));
    fill_xavier_uniform(p.wv.back(), rng);
  }
  p.wo = TensorT<S>::zeros(heads * head_v_dim, out_dim, true);
  fill_xavier_uniform(p.wo, rng);
  return p;
}

using AttentionParams = AttentionParamsT<float>;

/// Scale/shift of one layer normalization, plus its epsilon.
template <typename S>
struct LayerNormParamsT {
  TensorT<S> gamma;
  TensorT<S> beta;
  S epsilon = S(1e-5);
};

template <typename S>
LayerNormParamsT<S> make_layer_norm_params(std::size_t dim) {
  LayerNormParamsT<S> p;
  p.gamma = TensorT<S>::full(1, dim, S(1), true);
  p.beta = TensorT<S>::zeros(1, dim, true);
  return p;
}

using LayerNormParams = LayerNormParamsT<float>;

template <typename S>
TensorT<S> layer_norm(const TensorT<S>& x, const LayerNormParamsT<S>& p) {
  return layer_norm(x, p.gamma, p.beta, p.epsilon);
}

/// Dropout configuration: ratio, mode, and the stream that feeds the masks.
/// In eval mode the op is the identity and the stream is never touched.
template <typename S>
struct DropoutSpecT {
  S ratio = S(0);
  bool training = false;
  Rng* rng = nullptr;
};

using DropoutSpec = DropoutSpecT<float>;

template <typename S>
TensorT<S> dropout(const TensorT<S>& x, const DropoutSpecT<S>& spec) {
  return dropout(x, spec.ratio, spec.training, spec.rng);
}

namespace detail {

template <typename S>
void check_attention_shapes(const TensorT<S>& q, const TensorT<S>& k,
                            const TensorT<S>& v, const AttentionParamsT<S>& p) {
  if (p.heads == 0 || p.wq.size() != p.heads || p.wk.size() != p.heads ||
      p.wv.size() != p.heads) {
    throw ConfigError("attention: head count does not match projection list");
  }
  if (q.cols() != p.query_dim || k.cols() != p.key_dim || v.cols() != p.value_dim) {
    throw ConfigError("attention: input dims (" + q.shape_str() + ", " +
                      k.shape_str() + ", " + v.shape_str() +
                      ") do not match configured dims");
  }
  if (k.rows() != v.rows()) {
    throw DimensionError("attention: key rows " + k.shape_str() +
                         " vs value rows " + v.shape_str());
  }
  if (p.wo.rows() != p.heads * p.head_v_dim || p.wo.cols() != p.out_dim) {
    throw ConfigError("attention: output projection is " + p.wo.shape_str() +
                      ", expected " + std::to_string(p.heads * p.head_v_dim) +
                      "x" + std::to_string(p.out_dim));
  }
}

}  // namespace detail

/// Multi-head scaled dot-product attention. Per head,
/// O_i = softmax(q W^Q_i (k W^K_i)^T / sqrt(d)) v W^V_i; the concatenated
/// heads are reduced by the output projection.
template <typename S>
TensorT<S> multi_head_attention(const TensorT<S>& q, const TensorT<S>& k,
                                const TensorT<S>& v, const AttentionParamsT<S>& p) {
  detail::check_attention_shapes(q, k, v, p);
  std::vector<TensorT<S>> heads;
  heads.reserve(p.heads);
  for (std::size_t i = 0; i < p.heads; ++i) {
    auto qi = matmul(q, p.wq[i]);
    auto ki = matmul(k, p.wk[i]);
    auto vi = matmul(v, p.wv[i]);
    auto weights = scaled_softmax(matmul_nt(qi, ki), p.head_qk_dim);
    heads.push_back(matmul(weights, vi));
  }
  return matmul(concat_cols(heads), p.wo);
}

/// x W + b with a broadcast bias row.
template <typename S>
TensorT<S> linear(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b) {
  return add_rowvec(matmul(x, w), b);
}

}  // namespace facet
