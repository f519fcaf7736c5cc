#pragma once

#include <cstdint>
#include <vector>

#include "facet/cluster.hpp"
#include "facet/error.hpp"
#include "facet/metrics.hpp"

namespace facet {

struct SweepRow {
  double tau = 0.0;
  std::size_t clusters = 0;
  MetricsReport metrics;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t best_index = 0;  // argmax by pairwise F, first winner on ties
};

/// Cluster and score the linkage set at every threshold in the grid.
inline SweepResult sweep_threshold(const LinkageSet& links,
                                   const std::vector<std::int64_t>& truth,
                                   const std::vector<double>& tau_grid) {
  if (tau_grid.empty()) throw UsageError("sweep_threshold: empty tau grid");
  detail::check_labeled(truth);
  SweepResult result;
  result.rows.reserve(tau_grid.size());
  for (double tau : tau_grid) {
    auto edges = threshold_links(links, tau);
    auto partition = union_find_clusters(truth.size(), edges);
    SweepRow row;
    row.tau = tau;
    row.clusters = partition.count;
    row.metrics = evaluate_clustering(partition, truth);
    if (!result.rows.empty() &&
        row.metrics.pairwise.f > result.rows[result.best_index].metrics.pairwise.f) {
      result.best_index = result.rows.size();
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace facet
