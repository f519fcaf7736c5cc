#pragma once

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "facet/cluster.hpp"
#include "facet/error.hpp"
#include "facet/metrics.hpp"
#include "facet/sweep.hpp"
#include "facet/train.hpp"

namespace facet {

/// Shortest-round-trip formatting for float32 (9 significant digits) and
/// a fixed 17-digit form for doubles. Identical values always format to
/// identical bytes, which is what makes re-runs byte-comparable.
inline std::string format_float(float v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace detail {

inline std::ofstream open_text_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path + ": cannot open for writing");
  return out;
}

inline std::ifstream open_text_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open for reading");
  return in;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linkage CSV: header "q,k,p", one row per predicted pair.
// ---------------------------------------------------------------------------

inline void write_linkage_csv(const LinkageSet& links, const std::string& path) {
  auto out = detail::open_text_out(path);
  out << "q,k,p\n";
  for (const auto& row : links.rows) {
    out << row.query << ',' << row.candidate << ',' << format_float(row.probability)
        << '\n';
  }
  if (!out) throw FormatError(path + ": write failed");
}

inline LinkageSet read_linkage_csv(const std::string& path) {
  auto in = detail::open_text_in(path);
  std::string line;
  if (!std::getline(in, line) || (line != "q,k,p" && line != "q,k,p\r")) {
    throw FormatError(path + ": expected linkage CSV header \"q,k,p\"");
  }
  LinkageSet links;
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    LinkRow row;
    char* cursor = line.data();
    char* end = nullptr;
    unsigned long q = std::strtoul(cursor, &end, 10);
    if (end == cursor || *end != ',') {
      throw FormatError(path + ": malformed row at line " + std::to_string(line_no));
    }
    cursor = end + 1;
    unsigned long k = std::strtoul(cursor, &end, 10);
    if (end == cursor || *end != ',') {
      throw FormatError(path + ": malformed row at line " + std::to_string(line_no));
    }
    cursor = end + 1;
    float p = std::strtof(cursor, &end);
    if (end == cursor) {
      throw FormatError(path + ": malformed row at line " + std::to_string(line_no));
    }
    if (!(p >= 0.0f && p <= 1.0f)) {
      throw FormatError(path + ": probability out of [0,1] at line " +
                        std::to_string(line_no));
    }
    row.query = static_cast<std::uint32_t>(q);
    row.candidate = static_cast<std::uint32_t>(k);
    row.probability = p;
    if (!seen.emplace(row.query, row.candidate).second) {
      throw FormatError(path + ": duplicate (q, k) pair at line " +
                        std::to_string(line_no));
    }
    links.rows.push_back(row);
  }
  return links;
}

// ---------------------------------------------------------------------------
// Partition file: "instance_index<TAB>cluster_id" per line.
// ---------------------------------------------------------------------------

inline void write_partition(const ClusterPartition& partition, const std::string& path) {
  auto out = detail::open_text_out(path);
  for (std::size_t i = 0; i < partition.assignment.size(); ++i) {
    out << i << '\t' << partition.assignment[i] << '\n';
  }
  if (!out) throw FormatError(path + ": write failed");
}

inline ClusterPartition read_partition(const std::string& path) {
  auto in = detail::open_text_in(path);
  ClusterPartition partition;
  std::string line;
  std::size_t line_no = 0;
  std::uint32_t max_id = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    char* end = nullptr;
    unsigned long index = std::strtoul(line.data(), &end, 10);
    if (end == line.data() || *end != '\t') {
      throw FormatError(path + ": malformed partition row at line " +
                        std::to_string(line_no));
    }
    char* cursor = end + 1;
    unsigned long cluster = std::strtoul(cursor, &end, 10);
    if (end == cursor) {
      throw FormatError(path + ": malformed partition row at line " +
                        std::to_string(line_no));
    }
    if (index != partition.assignment.size()) {
      throw FormatError(path + ": expected instance " +
                        std::to_string(partition.assignment.size()) + " at line " +
                        std::to_string(line_no));
    }
    partition.assignment.push_back(static_cast<std::uint32_t>(cluster));
    max_id = std::max(max_id, static_cast<std::uint32_t>(cluster));
  }
  partition.count = partition.assignment.empty() ? 0 : max_id + 1;
  return partition;
}

// ---------------------------------------------------------------------------
// Metrics report: flat key:value text block, and a one-row CSV.
// ---------------------------------------------------------------------------

inline std::string report_text(const MetricsReport& r) {
  std::ostringstream out;
  out << "instances: " << r.instances << '\n'
      << "predicted_clusters: " << r.predicted_clusters << '\n'
      << "true_clusters: " << r.true_clusters << '\n'
      << "pairwise_precision: " << format_double(r.pairwise.precision) << '\n'
      << "pairwise_recall: " << format_double(r.pairwise.recall) << '\n'
      << "pairwise_f: " << format_double(r.pairwise.f) << '\n'
      << "bcubed_precision: " << format_double(r.bcubed.precision) << '\n'
      << "bcubed_recall: " << format_double(r.bcubed.recall) << '\n'
      << "bcubed_f: " << format_double(r.bcubed.f) << '\n'
      << "nmi: " << format_double(r.nmi) << '\n';
  return out.str();
}

inline std::string report_csv(const MetricsReport& r) {
  std::ostringstream out;
  out << "instances,predicted_clusters,true_clusters,pairwise_precision,"
         "pairwise_recall,pairwise_f,bcubed_precision,bcubed_recall,bcubed_f,nmi\n"
      << r.instances << ',' << r.predicted_clusters << ',' << r.true_clusters << ','
      << format_double(r.pairwise.precision) << ',' << format_double(r.pairwise.recall)
      << ',' << format_double(r.pairwise.f) << ',' << format_double(r.bcubed.precision)
      << ',' << format_double(r.bcubed.recall) << ',' << format_double(r.bcubed.f)
      << ',' << format_double(r.nmi) << '\n';
  return out.str();
}

inline void write_report(const MetricsReport& r, const std::string& path) {
  auto out = detail::open_text_out(path);
  out << report_text(r);
  if (!out) throw FormatError(path + ": write failed");
}

inline void write_report_csv(const MetricsReport& r, const std::string& path) {
  auto out = detail::open_text_out(path);
  out << report_csv(r);
  if (!out) throw FormatError(path + ": write failed");
}

// ---------------------------------------------------------------------------
// ROC CSV: "threshold,fpr,tpr". The leading sentinel threshold prints as inf.
// ---------------------------------------------------------------------------

inline void write_roc_csv(const std::vector<RocPoint>& points, const std::string& path) {
  auto out = detail::open_text_out(path);
  out << "threshold,fpr,tpr\n";
  for (const auto& pt : points) {
    out << format_double(pt.threshold) << ',' << format_double(pt.fpr) << ','
        << format_double(pt.tpr) << '\n';
  }
  if (!out) throw FormatError(path + ": write failed");
}

// ---------------------------------------------------------------------------
// Sweep CSV: one row per threshold.
// ---------------------------------------------------------------------------

inline void write_sweep_csv(const SweepResult& sweep, const std::string& path) {
  auto out = detail::open_text_out(path);
  out << "tau,clusters,pairwise_f,bcubed_f,nmi,best\n";
  for (std::size_t i = 0; i < sweep.rows.size(); ++i) {
    const auto& row = sweep.rows[i];
    out << format_double(row.tau) << ',' << row.clusters << ','
        << format_double(row.metrics.pairwise.f) << ','
        << format_double(row.metrics.bcubed.f) << ','
        << format_double(row.metrics.nmi) << ',' << (i == sweep.best_index ? 1 : 0)
        << '\n';
  }
  if (!out) throw FormatError(path + ": write failed");
}

// ---------------------------------------------------------------------------
// Loss trace CSV: epoch, mean_loss, lr.
// ---------------------------------------------------------------------------

inline void write_loss_trace_csv(const std::vector<EpochStats>& trace,
                                 const std::string& path) {
  auto out = detail::open_text_out(path);
  out << "epoch,mean_loss,lr\n";
  for (const auto& row : trace) {
    out << row.epoch << ',' << format_double(row.mean_loss) << ','
        << format_double(row.lr) << '\n';
  }
  if (!out) throw FormatError(path + ": write failed");
}

// ---------------------------------------------------------------------------
// Ablation table CSV: one row per model variant.
// ---------------------------------------------------------------------------

struct AblationRow {
  std::string variant;
  double best_tau = 0.0;
  double pairwise_f = 0.0;
  double bcubed_f = 0.0;
  double nmi = 0.0;
};

inline void write_ablation_csv(const std::vector<AblationRow>& rows,
                               const std::string& path) {
  auto out = detail::open_text_out(path);
  out << "variant,best_tau,pairwise_f,bcubed_f,nmi\n";
  for (const auto& row : rows) {
    out << row.variant << ',' << format_double(row.best_tau) << ','
        << format_double(row.pairwise_f) << ',' << format_double(row.bcubed_f) << ','
        << format_double(row.nmi) << '\n';
  }
  if (!out) throw FormatError(path + ": write failed");
}

}  // namespace facet
