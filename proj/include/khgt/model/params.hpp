#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "khgt/numerics/tape.hpp"

namespace khgt::model {

using numerics::Tensor;
using numerics::TensorMap;
using numerics::Var;

/// Architecture sizes. `relations` is R, the number of item-item relation
/// slots; `users`/`items` size the id embedding tables.
struct Hyper {
  std::uint32_t dim = 16;
  std::uint32_t heads = 2;
  std::uint32_t channels = 2;
  std::uint32_t layers = 2;
  std::uint32_t behaviors = 1;
  std::uint32_t relations = 0;
  std::uint32_t users = 0;
  std::uint32_t items = 0;

  std::uint32_t head_dim() const { return dim / heads; }
  friend bool operator==(const Hyper&, const Hyper&) = default;
};

/// Throws ContractError unless dim % heads == 0, 1 <= channels <= behaviors,
/// layers >= 1 and all sizes are positive.
void validate(const Hyper& hyper);

namespace names {
inline constexpr const char* kUserEmbedding = "user_embedding";
inline constexpr const char* kItemEmbedding = "item_embedding";
inline constexpr const char* kTimeProjection = "time_projection";
inline constexpr const char* kScore = "score.z";
inline constexpr const char* kFusionA0 = "fusion.a0";
inline constexpr const char* kFusionB0 = "fusion.b0";
}  // namespace names

/// Trainable tensors Θ plus the sizes they were built for. Tensor names are
/// stable and double as checkpoint keys.
struct ModelParams {
  Hyper hyper;
  TensorMap tensors;

  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);
  std::size_t num_scalars() const;
};

/// Uniform(-1/sqrt(d), 1/sqrt(d)) for embeddings and weights, zero for gate
/// logits and biases.
ModelParams init_params(const Hyper& hyper, std::uint64_t seed);

/// Q/K/V base channels and their per-type gate logits.
struct ChannelSet {
  Var query_base, key_base, value_base;  // [M, d, d]
  Var query_gate, key_gate, value_gate;  // [types, M]
};

/// Mutual-attention projections, each [d, d] (H stacked heads of d/H rows).
struct MutualSet {
  Var query, key, value;
};

/// One side of the gated fusion: f(q) = B1 q + B2 sum(q) + c1, logit = w^T f(q) + c0.
struct FusionSet {
  Var b1, b2, c1, c0, weight;
};

/// All parameters registered on one tape.
struct BoundParams {
  Hyper hyper;
  Var user_embedding, item_embedding;
  Var time_projection;  // [K * 2d, d]
  ChannelSet interaction;
  ChannelSet relation;  // unset when R = 0
  MutualSet user_mutual, item_mutual;
  FusionSet behavior_fusion, relation_fusion;
  Var score;  // [d]
  std::vector<Var> all;  // every registered tensor, in registration order
};

BoundParams bind(numerics::Tape& tape, const Hyper& hyper, const TensorMap& tensors);

}  // namespace khgt::model
