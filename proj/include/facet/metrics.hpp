#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "facet/cluster.hpp"
#include "facet/error.hpp"

namespace facet {

struct PrecisionRecallF {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

struct MetricsReport {
  PrecisionRecallF pairwise;
  PrecisionRecallF bcubed;
  double nmi = 0.0;
  std::size_t instances = 0;
  std::size_t predicted_clusters = 0;
  std::size_t true_clusters = 0;
};

namespace detail {

inline double harmonic(double p, double r) {
  return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

/// Map arbitrary ids onto 0..k-1 in first-appearance order.
template <typename T>
std::vector<std::uint32_t> compact_ids(const std::vector<T>& ids) {
  std::unordered_map<T, std::uint32_t> seen;
  seen.reserve(ids.size());
  std::vector<std::uint32_t> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto [it, inserted] = seen.try_emplace(ids[i],
                                           static_cast<std::uint32_t>(seen.size()));
    out[i] = it->second;
  }
  return out;
}

inline void check_labeled(const std::vector<std::int64_t>& labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) {
      throw UsageError("metrics: instance " + std::to_string(i) +
                       " is unlabeled; metrics need full ground truth");
    }
  }
}

inline void check_partition_size(const ClusterPartition& pred,
                                 const std::vector<std::int64_t>& truth) {
  if (pred.assignment.size() != truth.size()) {
    throw UsageError("metrics: partition covers " +
                     std::to_string(pred.assignment.size()) + " instances, labels " +
                     std::to_string(truth.size()));
  }
  if (truth.empty()) throw UsageError("metrics: need at least one instance");
  check_labeled(truth);
}

struct Contingency {
  std::vector<std::uint64_t> pred_sizes;
  std::vector<std::uint64_t> true_sizes;
  // (pred cluster, true class) -> joint count
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint64_t> joint;
};

inline Contingency contingency_table(const std::vector<std::uint32_t>& pred,
                                     const std::vector<std::uint32_t>& truth) {
  Contingency table;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] >= table.pred_sizes.size()) table.pred_sizes.resize(pred[i] + 1, 0);
    if (truth[i] >= table.true_sizes.size()) table.true_sizes.resize(truth[i] + 1, 0);
    ++table.pred_sizes[pred[i]];
    ++table.true_sizes[truth[i]];
    ++table.joint[{pred[i], truth[i]}];
  }
  return table;
}

inline std::uint64_t pairs_of(std::uint64_t n) { return n * (n - 1) / 2; }

}  // namespace detail

/// Precision/recall/F over unordered instance pairs: a pair counts as true
/// positive when it shares both a predicted cluster and a ground-truth id.
/// Counting is exact 64-bit via the contingency table.
inline PrecisionRecallF pairwise_f(const ClusterPartition& pred,
                                   const std::vector<std::int64_t>& truth) {
  detail::check_partition_size(pred, truth);
  auto pred_ids = detail::compact_ids(pred.assignment);
  auto true_ids = detail::compact_ids(truth);
  auto table = detail::contingency_table(pred_ids, true_ids);

  std::uint64_t tp = 0, pred_pairs = 0, true_pairs = 0;
  for (const auto& [cell, count] : table.joint) tp += detail::pairs_of(count);
  for (auto n : table.pred_sizes) pred_pairs += detail::pairs_of(n);
  for (auto n : table.true_sizes) true_pairs += detail::pairs_of(n);

  PrecisionRecallF out;
  out.precision = pred_pairs > 0 ? static_cast<double>(tp) / static_cast<double>(pred_pairs) : 0.0;
  out.recall = true_pairs > 0 ? static_cast<double>(tp) / static_cast<double>(true_pairs) : 0.0;
  out.f = detail::harmonic(out.precision, out.recall);
  return out;
}

/// BCubed precision/recall averaged per instance; F is the harmonic mean
/// of the two averages.
inline PrecisionRecallF bcubed_f(const ClusterPartition& pred,
                                 const std::vector<std::int64_t>& truth) {
  detail::check_partition_size(pred, truth);
  auto pred_ids = detail::compact_ids(pred.assignment);
  auto true_ids = detail::compact_ids(truth);
  auto table = detail::contingency_table(pred_ids, true_ids);

  // For instance e: precision = |C(e) ∩ L(e)| / |C(e)|, recall likewise over
  // L(e). Summing per joint cell: each of the `count` members contributes the
  // same ratio, so the per-instance average folds into cell arithmetic.
  double precision_sum = 0.0, recall_sum = 0.0;
  for (const auto& [cell, count] : table.joint) {
    double joint = static_cast<double>(count);
    precision_sum += joint * joint / static_cast<double>(table.pred_sizes[cell.first]);
    recall_sum += joint * joint / static_cast<double>(table.true_sizes[cell.second]);
  }
  double n = static_cast<double>(truth.size());
  PrecisionRecallF out;
  out.precision = precision_sum / n;
  out.recall = recall_sum / n;
  out.f = detail::harmonic(out.precision, out.recall);
  return out;
}

namespace detail {

inline double nmi_ordered(const std::vector<std::uint32_t>& a,
                          const std::vector<std::uint32_t>& b) {
  auto table = contingency_table(a, b);
  double n = static_cast<double>(a.size());
  double h_a = 0.0, h_b = 0.0;
  for (auto c : table.pred_sizes) {
    if (c > 0) {
      double p = static_cast<double>(c) / n;
      h_a -= p * std::log(p);
    }
  }
  for (auto c : table.true_sizes) {
    if (c > 0) {
      double p = static_cast<double>(c) / n;
      h_b -= p * std::log(p);
    }
  }
  // zero-entropy convention: a single-group partition matches only itself
  if (h_a == 0.0 || h_b == 0.0) return (a == b) ? 1.0 : 0.0;
  double mi = 0.0;
  for (const auto& [cell, count] : table.joint) {
    double pij = static_cast<double>(count) / n;
    double pi = static_cast<double>(table.pred_sizes[cell.first]) / n;
    double pj = static_cast<double>(table.true_sizes[cell.second]) / n;
    mi += pij * std::log(pij / (pi * pj));
  }
  return mi / std::sqrt(h_a * h_b);
}

}  // namespace detail

/// Normalized mutual information I(A,B)/sqrt(H(A)H(B)). Exactly symmetric:
/// arguments are ordered canonically before evaluation, and identical
/// partitions short-circuit to 1.
inline double nmi(const ClusterPartition& pred, const std::vector<std::int64_t>& truth) {
  detail::check_partition_size(pred, truth);
  auto a = detail::compact_ids(pred.assignment);
  auto b = detail::compact_ids(truth);
  if (a == b) return 1.0;
  if (std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end())) {
    std::swap(a, b);
  }
  return detail::nmi_ordered(a, b);
}

inline std::size_t distinct_count(const std::vector<std::int64_t>& ids) {
  auto compact = detail::compact_ids(ids);
  return compact.empty() ? 0 : 1 + *std::max_element(compact.begin(), compact.end());
}

inline MetricsReport evaluate_clustering(const ClusterPartition& pred,
                                         const std::vector<std::int64_t>& truth) {
  MetricsReport report;
  report.pairwise = pairwise_f(pred, truth);
  report.bcubed = bcubed_f(pred, truth);
  report.nmi = nmi(pred, truth);
  report.instances = truth.size();
  report.predicted_clusters = pred.count;
  report.true_clusters = distinct_count(truth);
  return report;
}

// ---------------------------------------------------------------------------
// ROC over linkage predictions
// ---------------------------------------------------------------------------

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

/// ROC of link probabilities against ground-truth same-identity labels,
/// restricted to each query's top_k highest-probability candidates. Points
/// are emitted per distinct probability (rule: positive when p >= t), led
/// by an above-maximum sentinel at (0, 0). FPR/TPR are non-decreasing as
/// the threshold falls.
inline std::vector<RocPoint> roc_points(const LinkageSet& links,
                                        const std::vector<std::int64_t>& truth,
                                        std::size_t top_k) {
  if (top_k < 1) throw UsageError("roc_points: top_k must be >= 1");
  detail::check_labeled(truth);

  std::unordered_map<std::uint32_t, std::vector<const LinkRow*>> by_query;
  for (const auto& row : links.rows) {
    if (row.query >= truth.size() || row.candidate >= truth.size()) {
      throw UsageError("roc_points: link row references unlabeled instance " +
                       std::to_string(std::max(row.query, row.candidate)));
    }
    by_query[row.query].push_back(&row);
  }

  // (probability, is_positive) pool over every query's top_k
  std::vector<std::pair<float, bool>> pool;
  pool.reserve(links.rows.size());
  for (auto& [query, rows] : by_query) {
    std::sort(rows.begin(), rows.end(), [](const LinkRow* a, const LinkRow* b) {
      if (a->probability != b->probability) return a->probability > b->probability;
      return a->candidate < b->candidate;
    });
    std::size_t take = std::min(top_k, rows.size());
    for (std::size_t i = 0; i < take; ++i) {
      pool.emplace_back(rows[i]->probability,
                        truth[rows[i]->query] == truth[rows[i]->candidate]);
    }
  }
  std::sort(pool.begin(), pool.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  std::uint64_t total_pos = 0, total_neg = 0;
  for (const auto& [p, positive] : pool) (positive ? total_pos : total_neg) += 1;

  std::vector<RocPoint> points;
  points.push_back(RocPoint{std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::uint64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < pool.size()) {
    float threshold = pool[i].first;
    while (i < pool.size() && pool[i].first == threshold) {
      (pool[i].second ? tp : fp) += 1;
      ++i;
    }
    points.push_back(RocPoint{
        static_cast<double>(threshold),
        total_neg > 0 ? static_cast<double>(fp) / static_cast<double>(total_neg) : 0.0,
        total_pos > 0 ? static_cast<double>(tp) / static_cast<double>(total_pos) : 0.0});
  }
  return points;
}

/// Trapezoidal area under an ROC point list.
inline double roc_auc(const std::vector<RocPoint>& points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += 0.5 * (points[i].tpr + points[i - 1].tpr) *
            (points[i].fpr - points[i - 1].fpr);
  }
  return area;
}

}  // namespace facet
