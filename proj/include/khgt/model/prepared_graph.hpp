#pragma once

#include <cstdint>
#include <vector>

#include "khgt/data/subgraph.hpp"
#include "khgt/model/params.hpp"

namespace khgt::model {

using numerics::SharedIndex;

/// Pre-projection sinusoid of a time slot: 2d entries, even positions
/// sin(slot / 10000^(2l/d)), odd positions cos(slot / 10000^((2l+1)/d)).
Tensor sinusoid(std::uint64_t slot, std::uint32_t dim);

/// Edges of one behavior type in local ids, ordered by user then item.
struct BehaviorEdges {
  SharedIndex users, items;
  Tensor encoding;   // [E, 2d] sinusoids of the edge slots
  Tensor user_norm;  // [E, H] 1/sqrt(deg(u) deg(j)), graph-convolution weights
  std::size_t count = 0;
};

/// Directed item edges of one relation: messages flow source -> target.
struct RelationEdges {
  SharedIndex targets, sources;
  Tensor norm;  // [E, H]
  std::size_t count = 0;
};

/// Row layout for type-level attention and fusion over `types` stacked
/// blocks of `nodes` rows each (row = type * nodes + node).
struct TypeLayout {
  std::size_t nodes = 0;
  std::size_t types = 0;
  SharedIndex query_rows;   // one entry per (node, t, t'), value t * nodes + node
  SharedIndex key_rows;     // value t' * nodes + node
  SharedIndex node_of_row;  // types * nodes entries

  static TypeLayout make(std::size_t nodes, std::size_t types);
};

/// Index arrays and constant tensors derived from a (sub)graph, built once
/// and shared by every forward pass over it.
struct PreparedGraph {
  std::uint32_t num_users = 0;
  std::uint32_t num_items = 0;
  std::uint32_t num_behaviors = 0;
  std::uint32_t num_relations = 0;
  SharedIndex user_ids, item_ids;  // global ids of local rows
  std::vector<BehaviorEdges> behaviors;
  std::vector<RelationEdges> relations;
  TypeLayout user_types;          // K types
  TypeLayout item_types;          // K + R types
  TypeLayout item_behavior_types; // K types
  TypeLayout item_relation_types; // R types
};

PreparedGraph prepare_graph(const data::SubGraph& graph, const Hyper& hyper);

}  // namespace khgt::model
