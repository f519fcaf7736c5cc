#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "facet/error.hpp"

namespace facet {

/// One predicted linkage: query node, candidate node, link probability.
struct LinkRow {
  std::uint32_t query = 0;
  std::uint32_t candidate = 0;
  float probability = 0.0f;
};

/// All linkage predictions of a run plus the default decision threshold.
struct LinkageSet {
  std::vector<LinkRow> rows;
  float tau = 0.5f;
};

/// Instance -> cluster id assignment; ids are 0..count-1 with no gaps,
/// ordered by each cluster's smallest member index.
struct ClusterPartition {
  std::vector<std::uint32_t> assignment;
  std::size_t count = 0;
};

struct Edge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Undirected edges whose probability strictly exceeds tau. Directed
/// duplicates collapse: a pair is linked if either direction crosses.
inline std::vector<Edge> threshold_links(const LinkageSet& links, double tau) {
  if (tau < 0.0 || tau > 1.0) {
    throw UsageError("threshold_links: tau must be in [0, 1]");
  }
  std::vector<Edge> edges;
  edges.reserve(links.rows.size() / 4);
  for (const auto& row : links.rows) {
    if (static_cast<double>(row.probability) > tau && row.query != row.candidate) {
      edges.push_back(Edge{std::min(row.query, row.candidate),
                           std::max(row.query, row.candidate)});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    return x.a != y.a ? x.a < y.a : x.b < y.b;
  });
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

/// Union by rank with path compression.
class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  std::uint32_t find(std::uint32_t x) {
    std::uint32_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      std::uint32_t next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint8_t> rank_;
};

/// Connected components of the edge set over n instances. Cluster ids are
/// assigned in order of each component's smallest member.
inline ClusterPartition union_find_clusters(std::size_t n,
                                            const std::vector<Edge>& edges) {
  DisjointSet sets(n);
  for (const auto& e : edges) {
    if (e.a >= n || e.b >= n) {
      throw UsageError("union_find_clusters: edge (" + std::to_string(e.a) + ", " +
                       std::to_string(e.b) + ") out of range [0, " +
                       std::to_string(n) + ")");
    }
    sets.unite(e.a, e.b);
  }
  ClusterPartition part;
  part.assignment.resize(n);
  std::vector<std::uint32_t> root_to_id(n, std::numeric_limits<std::uint32_t>::max());
  std::uint32_t next_id = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t root = sets.find(static_cast<std::uint32_t>(i));
    if (root_to_id[root] == std::numeric_limits<std::uint32_t>::max()) {
      root_to_id[root] = next_id++;
    }
    part.assignment[i] = root_to_id[root];
  }
  part.count = next_id;
  return part;
}

}  // namespace facet
