#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "facet/error.hpp"

namespace facet {

/// The feature set: N unit-normalized D-dimensional rows plus optional
/// per-instance identity labels (-1 = unlabeled). Immutable once built.
struct FeatureStore {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<float> features;        // count x dim, row-major
  std::vector<std::int64_t> labels;   // empty, or one id per row

  bool has_labels() const { return !labels.empty(); }

  const float* row(std::size_t i) const { return features.data() + i * dim; }

  std::span<const float> row_span(std::size_t i) const {
    return {features.data() + i * dim, dim};
  }

  /// Scale every row to unit L2 norm; returns the largest deviation seen.
  /// Rows already within `tolerance` of unit length are left untouched so
  /// a clean save/load round-trips bit-exactly.
  double renormalize(double tolerance = 1e-4) {
    double worst = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      float* r = features.data() + i * dim;
      double nsq = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        nsq += static_cast<double>(r[c]) * static_cast<double>(r[c]);
      }
      double norm = std::sqrt(nsq);
      if (norm < 1e-12) {
        throw NumericError("feature row " + std::to_string(i) + " has zero norm");
      }
      worst = std::max(worst, std::abs(norm - 1.0));
      if (std::abs(norm - 1.0) > tolerance) {
        for (std::size_t c = 0; c < dim; ++c) {
          r[c] = static_cast<float>(static_cast<double>(r[c]) / norm);
        }
      }
    }
    return worst;
  }
};

struct Neighbor {
  std::uint32_t index = 0;
  float similarity = 0.0f;
};

/// Per-node hop1 candidate lists and hop2 context lists, each sorted by
/// similarity descending with ties broken by ascending index.
struct NeighborGraph {
  std::size_t count = 0;
  std::size_t hop1_size = 0;
  std::size_t hop2_size = 0;
  std::vector<Neighbor> hop1;  // count * hop1_size
  std::vector<Neighbor> hop2;  // count * hop2_size

  std::span<const Neighbor> hop1_of(std::size_t node) const {
    check_node(node);
    return {hop1.data() + node * hop1_size, hop1_size};
  }

  std::span<const Neighbor> hop2_of(std::size_t node) const {
    check_node(node);
    return {hop2.data() + node * hop2_size, hop2_size};
  }

  void check_node(std::size_t node) const {
    if (node >= count) {
      throw UsageError("graph: node " + std::to_string(node) +
                       " out of range [0, " + std::to_string(count) + ")");
    }
  }
};

namespace detail {

inline void knn_for_range(const FeatureStore& store, std::size_t hop1_size,
                          std::size_t hop2_size, std::size_t begin, std::size_t end,
                          NeighborGraph& out) {
  const std::size_t n = store.count;
  const std::size_t d = store.dim;
  std::vector<Neighbor> scored(n > 0 ? n - 1 : 0);
  for (std::size_t i = begin; i < end; ++i) {
    const float* fi = store.row(i);
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const float* fj = store.row(j);
      double dot = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        dot += static_cast<double>(fi[c]) * static_cast<double>(fj[c]);
      }
      scored[m++] = Neighbor{static_cast<std::uint32_t>(j), static_cast<float>(dot)};
    }
    auto better = [](const Neighbor& a, const Neighbor& b) {
      if (a.similarity != b.similarity) return a.similarity > b.similarity;
      return a.index < b.index;
    };
    std::partial_sort(scored.begin(), scored.begin() + hop1_size, scored.begin() + m,
                      better);
    std::copy(scored.begin(), scored.begin() + hop1_size,
              out.hop1.begin() + i * hop1_size);
    std::copy(scored.begin(), scored.begin() + hop2_size,
              out.hop2.begin() + i * hop2_size);
  }
}

}  // namespace detail

/// Exact top-k neighbor lists over inner-product similarity, self excluded.
/// The hop2 list is the top-hop2_size ranking, a prefix of hop1's. Results
/// are deterministic and independent of the worker count.
inline NeighborGraph build_knn(const FeatureStore& store, std::size_t hop1_size,
                               std::size_t hop2_size, std::size_t workers = 1) {
  if (hop1_size >= store.count) {
    throw ConfigError("build_knn: hop1_size " + std::to_string(hop1_size) +
                      " must be < instance count " + std::to_string(store.count));
  }
  if (hop2_size < 1 || hop2_size > hop1_size) {
    throw ConfigError("build_knn: need 1 <= hop2_size <= hop1_size, got hop2_size=" +
                      std::to_string(hop2_size) + " hop1_size=" +
                      std::to_string(hop1_size));
  }
  NeighborGraph g;
  g.count = store.count;
  g.hop1_size = hop1_size;
  g.hop2_size = hop2_size;
  g.hop1.resize(store.count * hop1_size);
  g.hop2.resize(store.count * hop2_size);

  workers = std::max<std::size_t>(1, std::min(workers, store.count));
  if (workers == 1) {
    detail::knn_for_range(store, hop1_size, hop2_size, 0, store.count, g);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::size_t chunk = (store.count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      std::size_t begin = w * chunk;
      std::size_t end = std::min(store.count, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back([&, begin, end] {
        detail::knn_for_range(store, hop1_size, hop2_size, begin, end, g);
      });
    }
    for (auto& t : pool) t.join();
  }
  return g;
}

/// hop2 context indices of a node, most similar first.
inline std::vector<std::uint32_t> context_of(const NeighborGraph& graph,
                                             std::size_t node) {
  auto span = graph.hop2_of(node);
  std::vector<std::uint32_t> indices(span.size());
  for (std::size_t i = 0; i < span.size(); ++i) indices[i] = span[i].index;
  return indices;
}

/// hop1 candidate indices of a node, most similar first.
inline std::vector<std::uint32_t> candidates_of(const NeighborGraph& graph,
                                                std::size_t node) {
  auto span = graph.hop1_of(node);
  std::vector<std::uint32_t> indices(span.size());
  for (std::size_t i = 0; i < span.size(); ++i) indices[i] = span[i].index;
  return indices;
}

}  // namespace facet
