#pragma once

#include <cstdint>
#include <vector>

#include "khgt/data/interactions.hpp"

namespace khgt::data {

struct HeldOut {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::int64_t timestamp = 0;

  friend bool operator==(const HeldOut&, const HeldOut&) = default;
};

struct Split {
  InteractionLog train;
  std::vector<HeldOut> test;  // ascending user id
  std::uint32_t target_behavior = 0;
};

/// Time-aware leave-one-out: each user with at least two distinct target
/// items loses their latest one (ties go to the higher item id) to the test
/// set. All target records of that item for that user leave train;
/// auxiliary records stay.
Split leave_one_out_split(const InteractionLog& log, std::uint32_t target_behavior);

/// Target-behavior item sets per user, sorted ascending.
std::vector<std::vector<std::uint32_t>> target_items_by_user(const InteractionLog& log, std::uint32_t target_behavior);

/// Records of one behavior only, relabelled as behavior 0 of a K=1 log.
InteractionLog only_behavior(const InteractionLog& log, std::uint32_t behavior);

}  // namespace khgt::data
