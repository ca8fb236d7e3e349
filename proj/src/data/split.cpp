#include "khgt/data/split.hpp"

#include <algorithm>

#include "khgt/errors.hpp"

namespace khgt::data {

std::vector<std::vector<std::uint32_t>> target_items_by_user(const InteractionLog& log,
                                                             std::uint32_t target_behavior) {
  std::vector<std::vector<std::uint32_t>> items(log.num_users);
  for (const auto& r : log.records) {
    if (r.behavior == target_behavior) items[r.user].push_back(r.item);
  }
  for (auto& list : items) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return items;
}

Split leave_one_out_split(const InteractionLog& log, std::uint32_t target_behavior) {
  validate(log);
  if (target_behavior >= log.num_behaviors) {
    throw RangeError("target behavior " + std::to_string(target_behavior) + " >= " +
                     std::to_string(log.num_behaviors));
  }
  const auto distinct = target_items_by_user(log, target_behavior);

  struct Latest {
    bool set = false;
    std::int64_t timestamp = 0;
    std::uint32_t item = 0;
  };
  std::vector<Latest> latest(log.num_users);
  for (const auto& r : log.records) {
    if (r.behavior != target_behavior) continue;
    Latest& l = latest[r.user];
    if (!l.set || r.timestamp > l.timestamp || (r.timestamp == l.timestamp && r.item > l.item)) {
      l = {true, r.timestamp, r.item};
    }
  }

  Split split;
  split.target_behavior = target_behavior;
  split.train.num_users = log.num_users;
  split.train.num_items = log.num_items;
  split.train.num_behaviors = log.num_behaviors;
  std::vector<bool> held(log.num_users, false);
  for (std::uint32_t u = 0; u < log.num_users; ++u) {
    if (distinct[u].size() >= 2) {
      held[u] = true;
      split.test.push_back({u, latest[u].item, latest[u].timestamp});
    }
  }
  for (const auto& r : log.records) {
    if (r.behavior == target_behavior && held[r.user] && r.item == latest[r.user].item) continue;
    split.train.records.push_back(r);
  }
  return split;
}

InteractionLog only_behavior(const InteractionLog& log, std::uint32_t behavior) {
  if (behavior >= log.num_behaviors) throw RangeError("behavior " + std::to_string(behavior) + " is out of range");
  InteractionLog out{{}, log.num_users, log.num_items, 1};
  for (const auto& r : log.records)
    if (r.behavior == behavior) out.records.push_back({r.user, r.item, 0, r.timestamp});
  return out;
}

}  // namespace khgt::data
