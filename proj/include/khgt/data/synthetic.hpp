#pragma once

#include <cstdint>
#include <vector>

#include "khgt/data/interactions.hpp"

namespace khgt::data {

/// Latent-factor corpus generator. Behavior num_behaviors - 1 is the target
/// behavior; the others are auxiliary.
struct SyntheticSpec {
  std::uint32_t users = 200;
  std::uint32_t items = 100;
  std::uint32_t behaviors = 3;
  std::uint32_t latent_dim = 8;
  double noise = 0.1;
  /// Mixture weight of the target propensity inside each auxiliary propensity.
  double correlation = 0.8;
  std::uint32_t categories = 8;
  std::uint32_t target_min = 3;
  std::uint32_t target_max = 8;
  std::uint32_t auxiliary_min = 10;
  std::uint32_t auxiliary_max = 25;
  std::int64_t start_time = 1'600'000'000;
};

struct SyntheticCorpus {
  InteractionLog log;
  std::vector<std::uint32_t> categories;
};

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace khgt::data
