#pragma once

#include <cstdint>
#include <vector>

#include "khgt/data/graph.hpp"

namespace khgt::data {

/// A node-induced restriction of (G_u, G_v). Local ids index `user_ids` and
/// `item_ids`, which hold the global ids in ascending order.
struct SubGraph {
  std::vector<std::uint32_t> user_ids;
  std::vector<std::uint32_t> item_ids;
  MultiBehaviorGraph interactions;
  ItemRelationGraph item_relations;

  std::size_t num_nodes() const { return user_ids.size() + item_ids.size(); }
};

/// The whole graph as a SubGraph with identity id maps.
SubGraph full_view(const MultiBehaviorGraph& ui, const ItemRelationGraph& ii);

/// Keeps every edge whose endpoints are both selected. Id lists need not be sorted.
SubGraph induce_subgraph(const MultiBehaviorGraph& ui, const ItemRelationGraph& ii, std::vector<std::uint32_t> users,
                         std::vector<std::uint32_t> items);

/// Random walk with restart over G_u and G_v combined. The next hop is drawn
/// proportionally to a per-node weight that starts at the node's degree and
/// is multiplied by 0.9 on every visit. Stops at `max_nodes` distinct nodes
/// or after 50 * max_nodes steps.
SubGraph sample_subgraph(const MultiBehaviorGraph& ui, const ItemRelationGraph& ii, std::uint32_t max_nodes,
                         double restart_prob, std::uint64_t seed);

/// Everything within `hops` edges (G_u and G_v combined) of the seed nodes.
SubGraph neighborhood_subgraph(const MultiBehaviorGraph& ui, const ItemRelationGraph& ii,
                               const std::vector<std::uint32_t>& seed_users,
                               const std::vector<std::uint32_t>& seed_items, std::uint32_t hops);

/// Global node adjacency: users are [0, I), items are [I, I + J). Neighbor
/// lists are sorted and deduplicated across behaviors and relations.
std::vector<std::vector<std::uint32_t>> combined_adjacency(const MultiBehaviorGraph& ui,
                                                           const ItemRelationGraph& ii);

}  // namespace khgt::data
