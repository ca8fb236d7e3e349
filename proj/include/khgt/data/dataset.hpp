#pragma once

#include <cstdint>
#include <vector>

#include "khgt/data/graph.hpp"
#include "khgt/data/split.hpp"

namespace khgt::data {

/// A split together with the graphs built from its train part.
struct Dataset {
  Split split;
  MultiBehaviorGraph interactions;
  ItemRelationGraph item_relations;
};

struct DatasetOptions {
  std::uint32_t target_behavior = 0;
  std::int64_t time_resolution = kSecondsPerWeek;
  ItemGraphParams item_graph;
  /// Keep only target-behavior records (K = 1) before splitting.
  bool target_only = false;
};

Dataset build_dataset(const InteractionLog& log, const std::vector<std::uint32_t>& categories,
                      const DatasetOptions& options);

}  // namespace khgt::data
