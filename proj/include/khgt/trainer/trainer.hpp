#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "khgt/data/graph.hpp"
#include "khgt/data/split.hpp"
#include "khgt/model/khgt.hpp"

namespace khgt::trainer {

using model::ModelParams;
using numerics::GradientMap;
using numerics::TensorMap;
using numerics::Var;

struct TrainConfig {
  std::uint32_t dim = 16;
  std::uint32_t heads = 2;
  std::uint32_t channels = 2;
  std::uint32_t layers = 2;
  double learning_rate = 1e-3;
  double decay = 0.96;
  std::uint32_t batch_size = 32;
  std::uint32_t pairs_per_user = 2;
  double reg_weight = 0.01;
  std::uint32_t epochs = 50;
  std::uint64_t seed = 0;
  /// 0, or anything >= I + J, trains on the full graph.
  std::uint32_t subgraph_nodes = 5000;
  double restart_prob = 0.15;
  std::int64_t time_resolution = data::kSecondsPerWeek;
  double dropout = 0.1;
  model::Variant variant;
};

/// Regularization weights from the published search grid.
inline constexpr double kRegGrid[] = {0.1, 0.05, 0.01, 0.005, 0.001};

/// Throws ValidationError on non-positive sizes or rates out of range.
/// Returns advisory notes (e.g. a reg weight outside kRegGrid).
std::vector<std::string> check(const TrainConfig& config);

/// Architecture sizes for a config over the given graphs. The channel count
/// is clamped to the number of behavior types.
model::Hyper hyper_for(const TrainConfig& config, const data::MultiBehaviorGraph& ui,
                       const data::ItemRelationGraph& ii);

struct TrainingPair {
  std::uint32_t user = 0;
  std::uint32_t positive = 0;
  std::uint32_t negative = 0;

  friend bool operator==(const TrainingPair&, const TrainingPair&) = default;
};

/// For each listed user: `per_user` positives drawn uniformly with
/// replacement from their target set and as many negatives drawn uniformly
/// from the candidate items outside it (all items when `candidates` is
/// empty). Positives outside the candidates are dropped. Users without
/// positives or without negative candidates are skipped.
std::vector<TrainingPair> sample_pairs(const std::vector<std::vector<std::uint32_t>>& target_sets,
                                       std::uint32_t num_items, std::span<const std::uint32_t> users,
                                       std::uint32_t per_user, std::uint64_t seed,
                                       std::span<const std::uint32_t> candidates = {});

/// sum max(0, 1 - pos + neg) + reg * sum ||theta||_F^2, on the tape.
Var hinge_loss(Var positive_scores, Var negative_scores, std::span<const Var> params, double reg_weight);

/// Same, on plain values.
double hinge_loss(std::span<const double> positive_scores, std::span<const double> negative_scores,
                  const TensorMap& params, double reg_weight);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  TensorMap first_moment;
  TensorMap second_moment;
  std::uint64_t step = 0;
  double learning_rate = 1e-3;
};

OptimizerState init_optimizer(const TensorMap& params, double learning_rate);

/// One bias-corrected Adam update. Throws NumericError naming the parameter
/// if a gradient is not finite; parameters are left untouched in that case.
void adam_step(TensorMap& params, const GradientMap& grads, OptimizerState& state, const AdamConfig& adam = {});

/// Epoch-boundary decay of the learning rate.
void decay_learning_rate(OptimizerState& state, double decay);

struct EpochStats {
  std::uint32_t epoch = 0;
  double mean_loss = 0.0;   // mean hinge per pair + mean regularization per step
  double mean_hinge = 0.0;  // mean hinge per pair
  double learning_rate = 0.0;
  std::size_t pairs = 0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Hinge-loss training with Adam over mini-batches of users. Each step
/// encodes either the full graph or a freshly sampled sub-graph.
TrainResult train(const TrainConfig& config, const data::Split& split, const data::MultiBehaviorGraph& ui,
                  const data::ItemRelationGraph& ii, const EpochCallback& on_epoch = {});

/// Training from given initial parameters (used by tests that inspect the
/// starting point).
TrainResult train_from(ModelParams initial, const TrainConfig& config, const data::Split& split,
                       const data::MultiBehaviorGraph& ui, const data::ItemRelationGraph& ii,
                       const EpochCallback& on_epoch = {});

}  // namespace khgt::trainer
