#pragma once

#include <cstdint>
#include <vector>

#include "khgt/model/params.hpp"
#include "khgt/model/prepared_graph.hpp"

namespace khgt::model {

inline constexpr double kLeakySlope = 0.01;

/// Architecture switches. The defaults give the full model; each flag turned
/// off yields one ablation variant.
struct Variant {
  bool attentive_aggregation = true;  // off: degree-normalized graph convolution
  bool mutual_attention = true;       // off: type aggregates pass through unchanged
  bool gated_fusion = true;           // off: mean pooling over types
  bool temporal = true;               // off: no time encoding inside messages
  bool item_relations = true;         // off: G_v is ignored
  bool channel_gates = true;          // off: channel 0 used directly for every type

  friend bool operator==(const Variant&, const Variant&) = default;
};

/// Verifies that every softmax family of a forward pass sums to one.
struct NormalizationAudit {
  double tolerance = 1e-9;
  std::size_t groups_checked = 0;
  double worst_deviation = 0.0;

  /// Rows of `probs` grouped by `segments`; every non-empty group, per column.
  void check_segments(const Tensor& probs, const numerics::Index& segments, std::size_t num_segments);
  /// Every row of `probs`.
  void check_rows(const Tensor& probs);
};

/// Attention and gate values recorded per layer for interpretability.
struct LayerTrace {
  Tensor user_relevance;  // [K*K*I', H], rows ordered as TypeLayout pairs
  Tensor item_relevance;  // [T*T*J', H], T = K + R (or K)
  Tensor user_behavior_gates;  // [K*I', 1]
  Tensor item_behavior_gates;  // [K*J', 1]
  Tensor item_relation_gates;  // [R*J', 1], empty without relations
  std::size_t item_types = 0;
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
};

struct ForwardOptions {
  Variant variant;
  bool training = false;
  double dropout = 0.0;
  std::uint64_t dropout_seed = 0;
  NormalizationAudit* audit = nullptr;
  ForwardTrace* trace = nullptr;
};

/// T(slot) * W_k for a batch of pre-computed sinusoid rows [E, 2d].
Var temporal_encode(Var sinusoids, Var projection, std::uint32_t behavior, std::uint32_t dim);

/// Type-specific transforms composed from the shared channels.
struct TypeTransforms {
  Var query, key, value;  // [d, d]
};

/// Gate softmaxes over channels, one row per type.
struct ChannelGates {
  Var alpha, beta, gamma;  // [types, M]
};

ChannelGates channel_gates(const ChannelSet& channels, NormalizationAudit* audit);

/// Q_t = sum_m alpha[t, m] Qbar_m (likewise K with beta and V with gamma).
/// With `gated` off, channel 0 is returned unmixed.
TypeTransforms compose_type_transforms(const ChannelSet& channels, const ChannelGates& gates, std::uint32_t type,
                                       std::uint32_t dim, bool gated);

struct Attention {
  Var summed;   // [targets, d] sum of messages, before activation
  Var weights;  // [E, H]
};

/// Multi-head scaled dot-product attention over edge lists: per edge e,
/// logit_h = <q_e, k_e>_h / sqrt(d/H), normalized over edges sharing a
/// target, message = concat_h(w_h * v_e,h), summed per target.
Attention attend(Var queries, Var keys, Var values, const SharedIndex& targets, std::size_t num_targets,
                 std::uint32_t heads, NormalizationAudit* audit);

/// Fixed-weight propagation used by the graph-convolution variant.
Attention convolve(Var values, const Tensor& weights, const SharedIndex& targets, std::size_t num_targets);

/// LeakyReLU of the summed messages. Empty neighborhoods stay zero.
Var aggregate(Var summed);

struct MutualAttention {
  Var output;   // [types * nodes, d]
  Var weights;  // [types * types * nodes, H]
};

/// Type-level attention between the stacked per-type aggregates of each node.
MutualAttention mutual_attention(Var stacked, const TypeLayout& layout, const MutualSet& projections,
                                 std::uint32_t heads, NormalizationAudit* audit);

struct Fusion {
  Var output;  // [nodes, d]
  Var gates;   // [types * nodes, 1]
};

/// Softmax-gated combination of one node's per-type vectors:
/// logit_t = w^T (B1 q_t + B2 sum_t' q_t' + c1) + c0.
Fusion gated_fusion(Var stacked, const TypeLayout& layout, const FusionSet& fusion, NormalizationAudit* audit);

/// Mean over types.
Var mean_fusion(Var stacked, const TypeLayout& layout);

struct NodeEmbeddings {
  Var users;  // [I', d]
  Var items;  // [J', d]
};

/// One propagation layer: per-type attentive aggregation over G_u and G_v,
/// mutual attention across types, gated fusion.
NodeEmbeddings forward_layer(const BoundParams& params, const PreparedGraph& graph, const NodeEmbeddings& input,
                             std::uint32_t layer, const ForwardOptions& options);

/// Id embeddings of the graph's nodes (layer 0 input).
NodeEmbeddings initial_embeddings(const BoundParams& params, const PreparedGraph& graph);

/// Sum of the L layer outputs.
NodeEmbeddings encode(const BoundParams& params, const PreparedGraph& graph, const ForwardOptions& options);

/// z^T (phi_u * phi_j) for each (user row, item row) pair; returns [P, 1].
Var score_pairs(const NodeEmbeddings& embeddings, Var z, const SharedIndex& users, const SharedIndex& items);

/// Plain-value score for already computed embeddings.
double score(std::span<const double> user, std::span<const double> item, std::span<const double> z);

/// Final embeddings as plain tensors (evaluation).
struct EncodedGraph {
  Tensor users;
  Tensor items;
};

EncodedGraph encode_values(const ModelParams& params, const PreparedGraph& graph, const ForwardOptions& options);

}  // namespace khgt::model
