#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "khgt/data/graph.hpp"
#include "khgt/data/split.hpp"
#include "khgt/eval/metrics.hpp"
#include "khgt/model/khgt.hpp"

namespace khgt::eval {

inline constexpr std::uint32_t kNumNegatives = 99;
/// Above this many nodes, each user is scored on its own neighborhood sub-graph.
inline constexpr std::uint64_t kFullGraphLimit = 50000;

/// 99 distinct items outside `interacted` (sorted), uniform without
/// replacement from the stream (seed, "negatives", user). Throws
/// ValidationError naming the user when fewer than 99 candidates exist.
std::vector<std::uint32_t> sample_negatives(std::uint32_t user, std::uint32_t num_items,
                                            const std::vector<std::uint32_t>& interacted, std::uint64_t seed);

/// One unranked case per test user. Negatives avoid the user's train and
/// test target-behavior items.
std::vector<RankingCase> build_cases(const data::Split& split, std::uint32_t num_items, std::uint64_t seed);

/// Train target-interaction counts per case user.
std::vector<std::size_t> train_counts(const data::Split& split, const std::vector<RankingCase>& cases);

struct EvalConfig {
  std::uint64_t seed = 0;
  std::uint32_t workers = 1;
  model::Variant variant;
  std::uint64_t full_graph_limit = kFullGraphLimit;
};

/// Scores `items` for `user`, in order.
using CaseScorer = std::function<std::vector<double>(std::uint32_t user, const std::vector<std::uint32_t>& items)>;

/// Ranks every case with the scorer, fanning out over `workers` threads.
/// The scorer must be safe to call concurrently.
void rank_cases(std::vector<RankingCase>& cases, const CaseScorer& scorer, std::uint32_t workers);

/// Leave-one-out evaluation of a trained model.
MetricsReport evaluate(const model::ModelParams& params, const data::MultiBehaviorGraph& ui,
                       const data::ItemRelationGraph& ii, const data::Split& split, const EvalConfig& config);

/// The same protocol with uniform random scores (null model).
MetricsReport evaluate_random(const data::Split& split, std::uint32_t num_items, std::uint64_t seed);

}  // namespace khgt::eval
