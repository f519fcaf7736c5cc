#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "facet/error.hpp"
#include "facet/graph.hpp"
#include "facet/model.hpp"
#include "facet/nn.hpp"
#include "facet/rng.hpp"
#include "facet/tensor.hpp"

namespace facet {

struct TrainConfig {
  std::size_t batch_size = 32;
  double base_lr = 0.002;
  std::size_t warmup_steps = 500;
  std::size_t epochs = 60;
  double weight_decay = 0.0005;
  double momentum = 0.9;
  std::size_t hop1 = 150;
  std::size_t hop2 = 5;
  double dropout = 0.4;
  std::uint64_t seed = 0;
  // model shape
  std::size_t heads = 4;
  std::size_t head_dim = 64;
  std::size_t depth = 2;
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (cfg.base_lr < 0) throw ConfigError("train: base_lr must be >= 0");
  if (cfg.weight_decay < 0) throw ConfigError("train: weight_decay must be >= 0");
  if (cfg.momentum < 0 || cfg.momentum >= 1) {
    throw ConfigError("train: momentum must be in [0, 1)");
  }
  if (cfg.dropout < 0 || cfg.dropout >= 1) {
    throw ConfigError("train: dropout must be in [0, 1)");
  }
}

/// One query with its hop1 candidates and same-identity labels.
struct TrainingSample {
  std::uint32_t query = 0;
  std::vector<std::uint32_t> candidates;
  std::vector<std::uint8_t> labels;
};

/// One sample per labeled node; label_k = 1 iff the candidate shares the
/// query's identity. Emitted in node order; epochs shuffle separately.
inline std::vector<TrainingSample> make_samples(const FeatureStore& store,
                                                const NeighborGraph& graph) {
  if (!store.has_labels()) {
    throw UsageError("make_samples: feature store has no labels");
  }
  std::vector<TrainingSample> samples;
  samples.reserve(store.count);
  for (std::size_t q = 0; q < store.count; ++q) {
    if (store.labels[q] < 0) continue;
    TrainingSample s;
    s.query = static_cast<std::uint32_t>(q);
    s.candidates = candidates_of(graph, q);
    s.labels.reserve(s.candidates.size());
    for (auto k : s.candidates) {
      bool same = store.labels[k] >= 0 && store.labels[k] == store.labels[q];
      s.labels.push_back(same ? 1 : 0);
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

/// Mean binary cross-entropy between per-candidate link probabilities
/// (n x 1 tensor) and binary labels, with probabilities clamped to
/// [1e-7, 1 - 1e-7]. Gradient flows only through unclamped entries.
template <typename S>
TensorT<S> bce_loss(const TensorT<S>& probs, const std::vector<std::uint8_t>& labels) {
  if (probs.cols() != 1 || probs.rows() != labels.size()) {
    throw UsageError("bce_loss: probabilities " + probs.shape_str() + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const double lo = 1e-7, hi = 1.0 - 1e-7;
  auto node = detail::make_op_node<S>(1, 1, {probs.node()});
  const auto& pv = probs.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double p = std::clamp(static_cast<double>(pv[i]), lo, hi);
    acc += labels[i] ? -std::log(p) : -std::log(1.0 - p);
  }
  node->values[0] = static_cast<S>(acc / static_cast<double>(labels.size()));
  node->backward_fn = [labels](const auto& self, const std::vector<S>& g,
                               const std::vector<std::vector<S>*>& pg) {
    if (!pg[0]) return;
    const double lo = 1e-7, hi = 1.0 - 1e-7;
    const auto& pv = self.parents[0]->values;
    auto& dst = *pg[0];
    double inv_n = 1.0 / static_cast<double>(labels.size());
    double gout = static_cast<double>(g[0]);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      double p = static_cast<double>(pv[i]);
      if (p <= lo || p >= hi) continue;  // clamped: flat
      double y = labels[i] ? 1.0 : 0.0;
      dst[i] += static_cast<S>(gout * inv_n * (p - y) / (p * (1.0 - p)));
    }
  };
  return TensorT<S>(node);
}

/// Learning rate at a step: linear warm-up to base_lr, then cosine decay
/// to zero over the remaining steps.
inline double lr_at(std::size_t step, const TrainConfig& cfg, std::size_t total_steps) {
  if (step >= total_steps) {
    throw UsageError("lr_at: step " + std::to_string(step) + " outside [0, " +
                     std::to_string(total_steps) + ")");
  }
  if (step < cfg.warmup_steps) {
    return cfg.base_lr * static_cast<double>(step + 1) /
           static_cast<double>(cfg.warmup_steps);
  }
  double progress = static_cast<double>(step - cfg.warmup_steps) /
                    static_cast<double>(total_steps - cfg.warmup_steps);
  return cfg.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

/// SGD with classical momentum and decoupled weight decay. Decay applies
/// only to parameters registered with decay=true (weight matrices).
template <typename S>
class SgdMomentum {
 public:
  explicit SgdMomentum(std::vector<ParamRefT<S>> params, double momentum,
                       double weight_decay)
      : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
    velocity_.reserve(params_.size());
    for (const auto& p : params_) {
      velocity_.emplace_back(p.tensor->size(), S(0));
    }
  }

  /// v = momentum * v + grad; theta -= lr * v (and lr * wd * theta when
  /// decayed). Gradients are consumed and cleared.
  void step(double lr) {
    for (std::size_t p = 0; p < params_.size(); ++p) {
      auto& tensor = *params_[p].tensor;
      const auto& grad = tensor.grad();
      auto& vel = velocity_[p];
      auto& vals = tensor.values();
      double decay = params_[p].decay ? weight_decay_ : 0.0;
      for (std::size_t i = 0; i < vals.size(); ++i) {
        vel[i] = static_cast<S>(momentum_ * static_cast<double>(vel[i]) +
                                static_cast<double>(grad[i]));
        double update = lr * static_cast<double>(vel[i]) +
                        lr * decay * static_cast<double>(vals[i]);
        vals[i] = static_cast<S>(static_cast<double>(vals[i]) - update);
      }
      tensor.zero_grad();
    }
  }

 private:
  std::vector<ParamRefT<S>> params_;
  std::vector<std::vector<S>> velocity_;
  double momentum_;
  double weight_decay_;
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;  // at the epoch's last step
};

template <typename S>
struct TrainResultT {
  FaceTModelT<S> model;
  std::vector<EpochStats> trace;
};

using TrainResult = TrainResultT<float>;

/// Supervised training of a model variant over every labeled node.
/// Deterministic per seed: init, shuffling and dropout draw from disjoint
/// streams, and batch gradients accumulate in fixed sample order.
template <typename S>
TrainResultT<S> train_model(
    const FeatureStore& store, const NeighborGraph& graph, const TrainConfig& cfg,
    Variant variant,
    const std::function<void(std::size_t, FaceTModelT<S>&)>& on_epoch = {}) {
  validate(cfg);
  if (variant == Variant::naive) {
    throw UsageError("train: the naive variant has no trainable parameters");
  }
  if (!store.has_labels()) throw UsageError("train: feature store has no labels");

  TrainResultT<S> result;
  result.model = init_model<S>(variant, store.dim, cfg.heads, cfg.head_dim, cfg.depth,
                               static_cast<S>(cfg.dropout), cfg.seed);
  auto samples = make_samples(store, graph);
  if (samples.empty()) throw UsageError("train: no labeled samples");

  const std::size_t batches_per_epoch = (samples.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = cfg.epochs * batches_per_epoch;
  if (total_steps == 0) return result;

  SgdMomentum<S> optimizer(result.model.named_parameters(), cfg.momentum,
                           cfg.weight_decay);
  Rng shuffle_rng(cfg.seed, Rng::kShuffle);
  Rng dropout_rng(cfg.seed, Rng::kDropout);
  DropoutSpecT<S> drop{static_cast<S>(cfg.dropout), true, &dropout_rng};

  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    double epoch_lr = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      double lr = lr_at(step, cfg, total_steps);
      epoch_lr = lr;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& sample = samples[order[i]];
        TensorT<S> loss;
        try {
          auto [probs, ids] = query_forward(store, graph, result.model, sample.query,
                                            drop);
          loss = bce_loss(probs, sample.labels);
        } catch (const NumericError& e) {
          // diverged parameters surface as non-finite activations
          throw TrainingError("train: diverged at step " + std::to_string(step) +
                              " (query " + std::to_string(sample.query) +
                              "): " + e.what());
        }
        double value = static_cast<double>(loss.item());
        if (!std::isfinite(value)) {
          throw TrainingError("train: non-finite loss at step " +
                              std::to_string(step) + " (query " +
                              std::to_string(sample.query) + ")");
        }
        epoch_loss += value;
        backward(loss);  // batch gradients accumulate; the step applies their sum
      }
      optimizer.step(lr);
      ++step;
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_loss = epoch_loss / static_cast<double>(samples.size());
    stats.lr = epoch_lr;
    result.trace.push_back(stats);
    if (on_epoch) on_epoch(epoch, result.model);
  }
  return result;
}

}  // namespace facet
