#include "khgt/data/dataset.hpp"

namespace khgt::data {

Dataset build_dataset(const InteractionLog& log, const std::vector<std::uint32_t>& categories,
                      const DatasetOptions& options) {
  Dataset d;
  if (options.target_only) {
    d.split = leave_one_out_split(only_behavior(log, options.target_behavior), 0);
  } else {
    d.split = leave_one_out_split(log, options.target_behavior);
  }
  d.interactions = build_user_item_graph(d.split.train, options.time_resolution);
  d.item_relations = build_item_item_graph(d.split.train, categories, options.item_graph);
  return d;
}

}  // namespace khgt::data
