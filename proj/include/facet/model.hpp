#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "facet/cluster.hpp"
#include "facet/graph.hpp"
#include "facet/nn.hpp"
#include "facet/tensor.hpp"

namespace facet {

/// Which parts of the architecture a model carries.
///   full    — relation encoder + linkage predictor
///   only_re — relation encoder + L2 distance head
///   only_lp — linkage predictor over raw features
///   naive   — thresholded raw cosine similarity, no learned parts
enum class Variant : std::uint32_t { full = 0, only_re = 1, only_lp = 2, naive = 3 };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::only_re: return "only_re";
    case Variant::only_lp: return "only_lp";
    case Variant::naive: return "naive";
  }
  throw UsageError("unknown variant");
}

inline Variant parse_variant(const std::string& name) {
  if (name == "full") return Variant::full;
  if (name == "only_re") return Variant::only_re;
  if (name == "only_lp") return Variant::only_lp;
  if (name == "naive") return Variant::naive;
  throw UsageError("unknown model variant \"" + name +
                   "\" (expected full, only_re, only_lp or naive)");
}

/// One self-attention block: attention followed by the post-attention norm.
template <typename S>
struct EncoderLayerT {
  AttentionParamsT<S> attn;
  LayerNormParamsT<S> norm;
};

/// A stack of self-attention blocks; the relation encoder additionally
/// carries the final cross-attention and the add&norm that fuses the
/// query feature with its context representation.
template <typename S>
struct EncoderParamsT {
  std::vector<EncoderLayerT<S>> layers;
  bool has_cross = false;
  AttentionParamsT<S> cross;
  LayerNormParamsT<S> final_norm;
};

/// Two-layer MLP head: 2D -> hidden with PReLU, hidden -> 2 logits.
template <typename S>
struct ClassifierParamsT {
  TensorT<S> w1, b1;
  TensorT<S> w2, b2;
  TensorT<S> prelu_slope;
};

template <typename S>
struct ParamRefT {
  std::string name;
  TensorT<S>* tensor;
  bool decay;  // weight matrices get weight decay; norms/biases/slope do not
};

/// All learnable state of one model plus its shape hyper-parameters.
template <typename S>
struct FaceTModelT {
  Variant variant = Variant::full;
  std::size_t dim = 0;
  std::size_t heads = 0;
  std::size_t head_dim = 0;
  std::size_t depth = 0;
  std::size_t hidden = 0;
  S dropout_ratio = S(0);

  EncoderParamsT<S> re;
  EncoderParamsT<S> lp;
  ClassifierParamsT<S> cls;

  bool has_re() const { return variant == Variant::full || variant == Variant::only_re; }
  bool has_lp() const { return variant == Variant::full || variant == Variant::only_lp; }

  std::vector<ParamRefT<S>> named_parameters();
};

namespace detail {

template <typename S>
EncoderLayerT<S> make_encoder_layer(std::size_t dim, std::size_t heads,
                                    std::size_t head_dim, Rng& rng) {
  EncoderLayerT<S> layer;
  layer.attn = make_attention_params<S>(heads, dim, dim, dim, head_dim, head_dim,
                                        dim, rng);
  layer.norm = make_layer_norm_params<S>(dim);
  return layer;
}

template <typename S>
void collect_attention(std::vector<ParamRefT<S>>& out, const std::string& prefix,
                       AttentionParamsT<S>& p) {
  for (std::size_t i = 0; i < p.heads; ++i) {
    std::string head = prefix + ".head" + std::to_string(i);
    out.push_back({head + ".wq", &p.wq[i], true});
    out.push_back({head + ".wk", &p.wk[i], true});
    out.push_back({head + ".wv", &p.wv[i], true});
  }
  out.push_back({prefix + ".wo", &p.wo, true});
}

template <typename S>
void collect_norm(std::vector<ParamRefT<S>>& out, const std::string& prefix,
                  LayerNormParamsT<S>& p) {
  out.push_back({prefix + ".gamma", &p.gamma, false});
  out.push_back({prefix + ".beta", &p.beta, false});
}

template <typename S>
void collect_encoder(std::vector<ParamRefT<S>>& out, const std::string& prefix,
                     EncoderParamsT<S>& enc) {
  for (std::size_t l = 0; l < enc.layers.size(); ++l) {
    std::string layer = prefix + ".layer" + std::to_string(l);
    collect_attention(out, layer + ".attn", enc.layers[l].attn);
    collect_norm(out, layer + ".norm", enc.layers[l].norm);
  }
  if (enc.has_cross) {
    collect_attention(out, prefix + ".cross", enc.cross);
    collect_norm(out, prefix + ".final_norm", enc.final_norm);
  }
}

}  // namespace detail

template <typename S>
std::vector<ParamRefT<S>> FaceTModelT<S>::named_parameters() {
  std::vector<ParamRefT<S>> out;
  if (has_re()) detail::collect_encoder(out, "re", re);
  if (has_lp()) detail::collect_encoder(out, "lp", lp);
  if (has_lp()) {
    out.push_back({"cls.w1", &cls.w1, true});
    out.push_back({"cls.b1", &cls.b1, false});
    out.push_back({"cls.w2", &cls.w2, true});
    out.push_back({"cls.b2", &cls.b2, false});
    out.push_back({"cls.prelu_slope", &cls.prelu_slope, false});
  }
  return out;
}

/// Freshly initialized model. Weight matrices are Xavier-uniform from the
/// init stream of `seed`; norms start at identity, the PReLU slope at 0.25.
/// Construction order is fixed, so a seed pins every draw.
template <typename S>
FaceTModelT<S> init_model(Variant variant, std::size_t dim, std::size_t heads,
                          std::size_t head_dim, std::size_t depth, S dropout_ratio,
                          std::uint64_t seed) {
  if (variant != Variant::naive) {
    if (depth < 1) throw ConfigError("model: encoder depth must be >= 1");
    if (dim == 0 || heads == 0 || head_dim == 0) {
      throw ConfigError("model: dim, heads and head_dim must be positive");
    }
  }
  FaceTModelT<S> m;
  m.variant = variant;
  m.dim = dim;
  m.heads = heads;
  m.head_dim = head_dim;
  m.depth = depth;
  m.hidden = dim;
  m.dropout_ratio = dropout_ratio;
  if (variant == Variant::naive) return m;

  Rng rng(seed, Rng::kInit);
  if (m.has_re()) {
    for (std::size_t l = 0; l < depth; ++l) {
      m.re.layers.push_back(detail::make_encoder_layer<S>(dim, heads, head_dim, rng));
    }
    m.re.has_cross = true;
    m.re.cross = make_attention_params<S>(heads, dim, dim, dim, head_dim, head_dim,
                                          dim, rng);
    m.re.final_norm = make_layer_norm_params<S>(dim);
  }
  if (m.has_lp()) {
    for (std::size_t l = 0; l < depth; ++l) {
      m.lp.layers.push_back(detail::make_encoder_layer<S>(dim, heads, head_dim, rng));
    }
    m.cls.w1 = TensorT<S>::zeros(2 * dim, m.hidden, true);
    fill_xavier_uniform(m.cls.w1, rng);
    m.cls.b1 = TensorT<S>::zeros(1, m.hidden, true);
    m.cls.w2 = TensorT<S>::zeros(m.hidden, 2, true);
    fill_xavier_uniform(m.cls.w2, rng);
    m.cls.b2 = TensorT<S>::zeros(1, 2, true);
    m.cls.prelu_slope = TensorT<S>::scalar(S(0.25), true);
  }
  return m;
}

using FaceTModel = FaceTModelT<float>;

/// A context-enhanced node embedding and the node it came from.
template <typename S>
struct EnhancedFeatureT {
  TensorT<S> vec;  // 1 x D
  std::size_t source = 0;
};

using EnhancedFeature = EnhancedFeatureT<float>;

/// Self-attention blocks applied in sequence: each is attention with
/// q=k=v=x, dropout, residual add, layer norm.
template <typename S>
TensorT<S> self_attention_stack(TensorT<S> x, const EncoderParamsT<S>& enc,
                                const DropoutSpecT<S>& drop) {
  for (const auto& layer : enc.layers) {
    auto attended = dropout(multi_head_attention(x, x, x, layer.attn), drop);
    x = layer_norm(add(attended, x), layer.norm);
  }
  return x;
}

/// Relation encoder: refine the hop2 context with self-attention, cross-
/// attend the raw query feature over it, then fuse with add&norm.
template <typename S>
EnhancedFeatureT<S> relation_encode(const TensorT<S>& query_feature,
                                    const TensorT<S>& context,
                                    const EncoderParamsT<S>& enc,
                                    const DropoutSpecT<S>& drop,
                                    std::size_t source_index = 0) {
  if (context.rows() == 0) {
    throw UsageError("relation_encode: context must not be empty");
  }
  if (query_feature.rows() != 1 || query_feature.cols() != context.cols()) {
    throw ConfigError("relation_encode: query " + query_feature.shape_str() +
                      " vs context " + context.shape_str());
  }
  if (!enc.has_cross) {
    throw ConfigError("relation_encode: encoder lacks the cross-attention stage");
  }
  auto refined = self_attention_stack(context, enc, drop);
  auto context_repr = multi_head_attention(query_feature, refined, refined, enc.cross);
  auto enhanced = layer_norm(add(context_repr, query_feature), enc.final_norm);
  return EnhancedFeatureT<S>{enhanced, source_index};
}

/// Linkage predictor: refine the candidate set with self-attention, pair
/// each refined candidate with the query embedding, and classify. Returns
/// an n x 1 tensor of link probabilities aligned with the candidate order.
template <typename S>
TensorT<S> linkage_forward(const TensorT<S>& query_embedding,
                           const std::vector<TensorT<S>>& candidates,
                           const EncoderParamsT<S>& enc,
                           const ClassifierParamsT<S>& cls,
                           const DropoutSpecT<S>& drop) {
  if (candidates.empty()) {
    throw UsageError("linkage_forward: candidate set must not be empty");
  }
  auto stacked = concat_rows(candidates);
  if (query_embedding.rows() != 1 || query_embedding.cols() != stacked.cols()) {
    throw ConfigError("linkage_forward: query " + query_embedding.shape_str() +
                      " vs candidates " + stacked.shape_str());
  }
  auto refined = self_attention_stack(stacked, enc, drop);
  auto edges = concat_cols<S>({repeat_rows(query_embedding, refined.rows()), refined});
  auto hidden = prelu(linear(edges, cls.w1, cls.b1), cls.prelu_slope);
  auto logits = linear(hidden, cls.w2, cls.b2);
  auto probs = scaled_softmax(logits, 1);  // plain softmax over the two logits
  return select_col(probs, 0);             // column 0 = link probability
}

template <typename S>
TensorT<S> linkage_forward(const EnhancedFeatureT<S>& query,
                           const std::vector<EnhancedFeatureT<S>>& candidates,
                           const EncoderParamsT<S>& enc,
                           const ClassifierParamsT<S>& cls,
                           const DropoutSpecT<S>& drop) {
  std::vector<TensorT<S>> rows;
  rows.reserve(candidates.size());
  for (const auto& c : candidates) rows.push_back(c.vec);
  return linkage_forward(query.vec, rows, enc, cls, drop);
}

/// Distance head of the encoder-only model: e = 0.25 * ||N(a) - N(b)||^2
/// over L2-normalized embeddings, returned as (1 - e, e), the two-class
/// probability pair with the link class first.
template <typename S>
std::pair<TensorT<S>, TensorT<S>> distance_head(const TensorT<S>& a,
                                                const TensorT<S>& b) {
  auto na = l2_normalize_rows(a);
  auto nb = l2_normalize_rows(b);
  auto diff = sub(na, nb);
  auto e = scale(sum(mul(diff, diff)), S(0.25));
  auto p_link = affine(e, S(-1), S(1));
  return {p_link, e};
}

namespace detail {

template <typename S>
TensorT<S> feature_row(const FeatureStore& store, std::size_t node) {
  std::vector<S> vals(store.dim);
  const float* src = store.row(node);
  for (std::size_t c = 0; c < store.dim; ++c) vals[c] = static_cast<S>(src[c]);
  return TensorT<S>(1, store.dim, std::move(vals));
}

template <typename S>
TensorT<S> context_matrix(const FeatureStore& store, const NeighborGraph& graph,
                          std::size_t node) {
  auto span = graph.hop2_of(node);
  std::vector<S> vals(span.size() * store.dim);
  for (std::size_t r = 0; r < span.size(); ++r) {
    const float* src = store.row(span[r].index);
    for (std::size_t c = 0; c < store.dim; ++c) {
      vals[r * store.dim + c] = static_cast<S>(src[c]);
    }
  }
  return TensorT<S>(span.size(), store.dim, std::move(vals));
}

inline float clamp_probability(double p) {
  return static_cast<float>(std::clamp(p, 0.0, 1.0));
}

}  // namespace detail

/// Forward pass for one query: tensors of per-candidate link probabilities
/// plus the candidate order used. Differentiable; shared by training and
/// inference. The naive variant is handled separately (no tensors).
template <typename S>
std::pair<TensorT<S>, std::vector<std::uint32_t>> query_forward(
    const FeatureStore& store, const NeighborGraph& graph, const FaceTModelT<S>& model,
    std::size_t query, const DropoutSpecT<S>& drop) {
  if (model.variant == Variant::naive) {
    throw UsageError("query_forward: naive variant has no forward pass");
  }
  auto candidate_ids = candidates_of(graph, query);
  auto fq = detail::feature_row<S>(store, query);

  TensorT<S> probs;
  if (model.variant == Variant::only_lp) {
    std::vector<TensorT<S>> rows;
    rows.reserve(candidate_ids.size());
    for (auto k : candidate_ids) rows.push_back(detail::feature_row<S>(store, k));
    probs = linkage_forward(fq, rows, model.lp, model.cls, drop);
  } else {
    auto gq = relation_encode(fq, detail::context_matrix<S>(store, graph, query),
                              model.re, drop, query);
    std::vector<EnhancedFeatureT<S>> enhanced;
    enhanced.reserve(candidate_ids.size());
    for (auto k : candidate_ids) {
      enhanced.push_back(relation_encode(detail::feature_row<S>(store, k),
                                         detail::context_matrix<S>(store, graph, k),
                                         model.re, drop, k));
    }
    if (model.variant == Variant::full) {
      probs = linkage_forward(gq, enhanced, model.lp, model.cls, drop);
    } else {  // only_re: per-candidate distance head, stacked to n x 1
      std::vector<TensorT<S>> parts;
      parts.reserve(enhanced.size());
      for (auto& cand : enhanced) {
        parts.push_back(distance_head(gq.vec, cand.vec).first);
      }
      probs = concat_rows(parts);
    }
  }
  return {probs, std::move(candidate_ids)};
}

/// Linkage rows for one query in candidate (rank) order. Eval mode only;
/// deterministic, no randomness consumed.
template <typename S>
std::vector<LinkRow> predict_query(const FeatureStore& store,
                                   const NeighborGraph& graph,
                                   const FaceTModelT<S>& model, std::size_t query) {
  graph.check_node(query);
  std::vector<LinkRow> rows;
  if (model.variant == Variant::naive) {
    auto span = graph.hop1_of(query);
    rows.reserve(span.size());
    for (const auto& nb : span) {
      double p = 0.5 * (1.0 + static_cast<double>(nb.similarity));
      rows.push_back(LinkRow{static_cast<std::uint32_t>(query), nb.index,
                             detail::clamp_probability(p)});
    }
    return rows;
  }
  DropoutSpecT<S> eval_drop;  // identity
  auto [probs, candidate_ids] = query_forward(store, graph, model, query, eval_drop);
  rows.reserve(candidate_ids.size());
  for (std::size_t i = 0; i < candidate_ids.size(); ++i) {
    rows.push_back(LinkRow{static_cast<std::uint32_t>(query), candidate_ids[i],
                           detail::clamp_probability(
                               static_cast<double>(probs.values()[i]))});
  }
  return rows;
}

/// Linkage rows for every node, query-major. Queries are independent, so
/// they may be spread over workers; rows merge in fixed node order and the
/// result does not depend on the worker count.
template <typename S>
LinkageSet predict_all(const FeatureStore& store, const NeighborGraph& graph,
                       const FaceTModelT<S>& model, std::size_t workers = 1,
                       float tau = 0.5f) {
  std::vector<std::vector<LinkRow>> per_node(graph.count);
  workers = std::max<std::size_t>(1, std::min(workers, graph.count));
  if (workers == 1) {
    for (std::size_t q = 0; q < graph.count; ++q) {
      per_node[q] = predict_query(store, graph, model, q);
    }
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::size_t chunk = (graph.count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      std::size_t begin = w * chunk;
      std::size_t end = std::min(graph.count, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back([&, begin, end] {
        for (std::size_t q = begin; q < end; ++q) {
          per_node[q] = predict_query(store, graph, model, q);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  LinkageSet links;
  links.tau = tau;
  links.rows.reserve(graph.count * graph.hop1_size);
  for (auto& rows : per_node) {
    links.rows.insert(links.rows.end(), rows.begin(), rows.end());
  }
  return links;
}

}  // namespace facet
