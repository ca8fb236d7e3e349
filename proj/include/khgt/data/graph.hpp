#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "khgt/data/interactions.hpp"

namespace khgt::data {

/// Compressed sparse rows. `slots` is parallel to `neighbors` when present.
struct Csr {
  std::vector<std::uint32_t> offsets{0};
  std::vector<std::uint32_t> neighbors;
  std::vector<std::uint64_t> slots;

  std::size_t num_rows() const noexcept { return offsets.size() - 1; }
  std::size_t num_edges() const noexcept { return neighbors.size(); }
  std::size_t degree(std::size_t row) const { return offsets[row + 1] - offsets[row]; }
  std::span<const std::uint32_t> neighbors_of(std::size_t row) const {
    return std::span(neighbors).subspan(offsets[row], degree(row));
  }
  std::span<const std::uint64_t> slots_of(std::size_t row) const {
    return std::span(slots).subspan(offsets[row], degree(row));
  }
  bool has_edge(std::uint32_t row, std::uint32_t col) const;

  friend bool operator==(const Csr&, const Csr&) = default;
};

struct Edge {
  std::uint32_t source = 0;
  std::uint32_t target = 0;
  std::uint64_t slot = 0;
};

/// Rows sorted by source, neighbors ascending within a row. Duplicate
/// (source, target) pairs must already be removed.
Csr csr_from_edges(std::size_t rows, std::vector<Edge> edges, bool with_slots);

/// G_u: per behavior type, user->item and item->user adjacency with time slots.
struct MultiBehaviorGraph {
  std::uint32_t num_users = 0;
  std::uint32_t num_items = 0;
  std::uint32_t num_behaviors = 0;
  std::vector<Csr> by_user;  // [k] rows = users
  std::vector<Csr> by_item;  // [k] rows = items

  std::size_t num_edges() const;
  std::size_t num_edges(std::uint32_t behavior) const { return by_user[behavior].num_edges(); }

  friend bool operator==(const MultiBehaviorGraph&, const MultiBehaviorGraph&) = default;
};

enum class RelationKind : std::uint8_t { kCoInteraction, kSharedCategory };

struct RelationInfo {
  RelationKind kind = RelationKind::kCoInteraction;
  std::uint32_t behavior = 0;  // meaningful for kCoInteraction

  friend bool operator==(const RelationInfo&, const RelationInfo&) = default;
};

/// G_v: per relation, symmetric item->item adjacency without self loops.
struct ItemRelationGraph {
  std::uint32_t num_items = 0;
  std::vector<Csr> relations;
  std::vector<RelationInfo> info;

  std::uint32_t num_relations() const { return static_cast<std::uint32_t>(relations.size()); }
  std::size_t num_edges() const;

  friend bool operator==(const ItemRelationGraph&, const ItemRelationGraph&) = default;
};

/// Duplicate (user, item, behavior) records collapse to the latest timestamp.
MultiBehaviorGraph build_user_item_graph(const InteractionLog& log, std::int64_t resolution);

struct ItemGraphParams {
  std::uint32_t cap = 10;            // max neighbors per item and relation
  std::uint32_t min_co_count = 2;    // common users needed for a co-interaction edge
  std::uint64_t seed = 0;            // category down-sampling
};

/// K co-interaction relations (one per behavior) followed by one
/// shared-category relation.
ItemRelationGraph build_item_item_graph(const InteractionLog& log, const std::vector<std::uint32_t>& categories,
                                        const ItemGraphParams& params);

/// Item graph built from explicit symmetric pair lists, one list per relation.
ItemRelationGraph item_graph_from_pairs(std::uint32_t num_items,
                                        const std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>>& pairs,
                                        std::vector<RelationInfo> info = {});

}  // namespace khgt::data
