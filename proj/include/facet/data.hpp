#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "facet/error.hpp"
#include "facet/graph.hpp"
#include "facet/io.hpp"
#include "facet/rng.hpp"

namespace facet {

/// Parameters of the synthetic embedding generator. Each identity gets a
/// random unit mean direction; samples are the mean plus isotropic Gaussian
/// noise, renormalized. A `challenging_fraction` of samples draws the wider
/// `sigma_hard` noise, standing in for the low-quality instances that make
/// real collections hard to cluster.
struct SyntheticSpec {
  std::size_t identities = 50;
  std::size_t samples_min = 18;
  std::size_t samples_max = 22;
  std::size_t dim = 32;
  double sigma_clean = 0.1;
  double challenging_fraction = 0.2;
  double sigma_hard = 0.4;
  std::uint64_t seed = 0;
};

inline void validate(const SyntheticSpec& spec) {
  if (spec.identities < 2) throw ConfigError("synthetic: need at least 2 identities");
  if (spec.samples_min < 1 || spec.samples_min > spec.samples_max) {
    throw ConfigError("synthetic: need 1 <= samples_min <= samples_max");
  }
  if (spec.dim < 2) throw ConfigError("synthetic: dimension must be >= 2");
  if (!(spec.sigma_clean > 0) || spec.sigma_hard < spec.sigma_clean) {
    throw ConfigError("synthetic: need sigma_hard >= sigma_clean > 0");
  }
  if (spec.challenging_fraction < 0 || spec.challenging_fraction > 1) {
    throw ConfigError("synthetic: challenging fraction must be in [0, 1]");
  }
}

/// Deterministic synthetic store; identical spec (including seed) gives a
/// bit-identical result.
inline FeatureStore generate(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(spec.seed, Rng::kDataGen);
  FeatureStore store;
  store.dim = spec.dim;

  std::vector<double> mean(spec.dim);
  std::vector<double> sample(spec.dim);
  for (std::size_t id = 0; id < spec.identities; ++id) {
    double norm_sq = 0.0;
    for (auto& m : mean) {
      m = rng.normal();
      norm_sq += m * m;
    }
    double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& m : mean) m *= inv;

    std::size_t count =
        spec.samples_min + rng.uniform_index(spec.samples_max - spec.samples_min + 1);
    for (std::size_t s = 0; s < count; ++s) {
      bool hard = rng.uniform() < spec.challenging_fraction;
      double sigma = hard ? spec.sigma_hard : spec.sigma_clean;
      double nsq = 0.0;
      for (std::size_t c = 0; c < spec.dim; ++c) {
        sample[c] = mean[c] + sigma * rng.normal();
        nsq += sample[c] * sample[c];
      }
      if (nsq < 1e-24) throw NumericError("synthetic: degenerate zero-norm sample");
      double sinv = 1.0 / std::sqrt(nsq);
      for (std::size_t c = 0; c < spec.dim; ++c) {
        store.features.push_back(static_cast<float>(sample[c] * sinv));
      }
      store.labels.push_back(static_cast<std::int64_t>(id));
      ++store.count;
    }
  }
  return store;
}

// ---------------------------------------------------------------------------
// Feature file: "FCTF", version u32, N u64, D u32, N*D little-endian f32.
// ---------------------------------------------------------------------------

inline void save_features(const FeatureStore& store, const std::string& path) {
  io::FileWriter out(path);
  out.magic("FCTF");
  out.u32(kFeatureFormatVersion);
  out.u64(store.count);
  out.u32(static_cast<std::uint32_t>(store.dim));
  out.f32_array(store.features.data(), store.features.size());
  out.close();
}

inline FeatureStore load_features(const std::string& path) {
  io::FileReader in(path);
  in.expect_magic("FCTF");
  std::uint32_t version = in.u32();
  if (version != kFeatureFormatVersion) {
    throw FormatError(path + ": unsupported feature format version " +
                      std::to_string(version));
  }
  std::uint64_t n = in.u64();
  std::uint64_t d = in.u32();
  if (d == 0) throw FormatError(path + ": zero feature dimension");
  if (n != 0 && d > std::numeric_limits<std::uint64_t>::max() / n / 4) {
    throw FormatError(path + ": N*D overflows (" + std::to_string(n) + " x " +
                      std::to_string(d) + ")");
  }
  in.expect_remaining(n * d * 4, "feature payload size mismatch");

  FeatureStore store;
  store.count = static_cast<std::size_t>(n);
  store.dim = static_cast<std::size_t>(d);
  store.features.resize(store.count * store.dim);
  in.f32_array(store.features.data(), store.features.size());
  double worst = store.renormalize();
  if (worst > 1e-3) {
    std::cerr << path << ": warning: feature rows deviated from unit norm by up to "
              << worst << "; renormalized\n";
  }
  return store;
}

// ---------------------------------------------------------------------------
// Label file: "FCTL", version u32, N u64, N little-endian i64 (-1 = unlabeled).
// ---------------------------------------------------------------------------

inline void save_labels(const std::vector<std::int64_t>& labels,
                        const std::string& path) {
  io::FileWriter out(path);
  out.magic("FCTL");
  out.u32(kLabelFormatVersion);
  out.u64(labels.size());
  for (auto v : labels) out.i64(v);
  out.close();
}

inline std::vector<std::int64_t> load_labels(const std::string& path) {
  io::FileReader in(path);
  in.expect_magic("FCTL");
  std::uint32_t version = in.u32();
  if (version != kLabelFormatVersion) {
    throw FormatError(path + ": unsupported label format version " +
                      std::to_string(version));
  }
  std::uint64_t n = in.u64();
  if (n > std::numeric_limits<std::uint64_t>::max() / 8) {
    throw FormatError(path + ": label count overflows");
  }
  in.expect_remaining(n * 8, "label payload size mismatch");
  std::vector<std::int64_t> labels(static_cast<std::size_t>(n));
  for (auto& v : labels) v = in.i64();
  return labels;
}

/// Attach labels to a store, checking the counts line up.
inline void attach_labels(FeatureStore& store, std::vector<std::int64_t> labels) {
  if (labels.size() != store.count) {
    throw UsageError("labels: got " + std::to_string(labels.size()) +
                     " ids for " + std::to_string(store.count) + " instances");
  }
  store.labels = std::move(labels);
}

// ---------------------------------------------------------------------------
// Graph cache: "FCTG", version u32, N u64, hop1 u32, hop2 u32, then per node
// hop1 (u32 index, f32 similarity) pairs followed by hop2 pairs.
// ---------------------------------------------------------------------------

inline void save_graph(const NeighborGraph& graph, const std::string& path) {
  io::FileWriter out(path);
  out.magic("FCTG");
  out.u32(kGraphFormatVersion);
  out.u64(graph.count);
  out.u32(static_cast<std::uint32_t>(graph.hop1_size));
  out.u32(static_cast<std::uint32_t>(graph.hop2_size));
  for (std::size_t i = 0; i < graph.count; ++i) {
    for (const auto& nb : graph.hop1_of(i)) {
      out.u32(nb.index);
      out.f32(nb.similarity);
    }
    for (const auto& nb : graph.hop2_of(i)) {
      out.u32(nb.index);
      out.f32(nb.similarity);
    }
  }
  out.close();
}

inline NeighborGraph load_graph(const std::string& path) {
  io::FileReader in(path);
  in.expect_magic("FCTG");
  std::uint32_t version = in.u32();
  if (version != kGraphFormatVersion) {
    throw FormatError(path + ": unsupported graph format version " +
                      std::to_string(version));
  }
  std::uint64_t n = in.u64();
  std::uint64_t hop1 = in.u32();
  std::uint64_t hop2 = in.u32();
  std::uint64_t per_node = (hop1 + hop2) * 8;
  if (per_node != 0 && n > std::numeric_limits<std::uint64_t>::max() / per_node) {
    throw FormatError(path + ": graph size overflows");
  }
  in.expect_remaining(n * per_node, "graph payload size mismatch");

  NeighborGraph g;
  g.count = static_cast<std::size_t>(n);
  g.hop1_size = static_cast<std::size_t>(hop1);
  g.hop2_size = static_cast<std::size_t>(hop2);
  g.hop1.resize(g.count * g.hop1_size);
  g.hop2.resize(g.count * g.hop2_size);
  for (std::size_t i = 0; i < g.count; ++i) {
    for (std::size_t k = 0; k < g.hop1_size; ++k) {
      auto& nb = g.hop1[i * g.hop1_size + k];
      nb.index = in.u32();
      nb.similarity = in.f32();
      if (nb.index >= g.count) {
        throw FormatError(path + ": neighbor index " + std::to_string(nb.index) +
                          " out of range at byte offset " + std::to_string(in.offset()));
      }
    }
    for (std::size_t k = 0; k < g.hop2_size; ++k) {
      auto& nb = g.hop2[i * g.hop2_size + k];
      nb.index = in.u32();
      nb.similarity = in.f32();
      if (nb.index >= g.count) {
        throw FormatError(path + ": neighbor index " + std::to_string(nb.index) +
                          " out of range at byte offset " + std::to_string(in.offset()));
      }
    }
  }
  return g;
}

}  // namespace facet
