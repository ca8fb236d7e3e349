#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "khgt/data/graph.hpp"
#include "khgt/numerics/grad_check.hpp"
#include "khgt/trainer/trainer.hpp"

namespace khgt::trainer {

/// The small fixed instance used for end-to-end gradient checks:
/// I=4, J=6, K=2, R=2, d=8, H=2, M=2, L=1 and one pair per user.
struct TinyInstance {
  data::InteractionLog log;
  data::MultiBehaviorGraph interactions;
  data::ItemRelationGraph item_relations;
  model::Hyper hyper;
  std::vector<TrainingPair> pairs;
};

TinyInstance tiny_instance(std::uint64_t seed = 0);

/// Hinge loss of the full forward pass over `pairs` as a differentiable
/// function of every model tensor (no dropout).
numerics::ModelFn pipeline_loss(std::shared_ptr<const model::PreparedGraph> graph, const model::Hyper& hyper,
                                std::vector<TrainingPair> pairs, double reg_weight, const model::Variant& variant = {});

/// grad_check of pipeline_loss on the tiny instance at its initialization.
numerics::GradCheckResult check_tiny_gradients(double eps = 1e-5, std::uint64_t seed = 0);

}  // namespace khgt::trainer
