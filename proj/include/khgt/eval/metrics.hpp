#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace khgt::eval {

inline constexpr std::array<std::uint32_t, 6> kCutoffs{1, 3, 5, 7, 9, 10};
inline constexpr std::size_t kNumBuckets = 5;

/// 1 if rank <= n. Ranks are 1-based; rank 0 throws ContractError.
double hr_at_n(std::uint32_t rank, std::uint32_t n);

/// 1 / log2(1 + rank) if rank <= n, else 0.
double ndcg_at_n(std::uint32_t rank, std::uint32_t n);

/// 1-based rank of the positive among the candidates, by score descending
/// with ties broken by lower item id.
std::uint32_t rank_of_positive(double positive_score, std::uint32_t positive_item,
                               std::span<const double> negative_scores, std::span<const std::uint32_t> negative_items);

struct MetricValues {
  std::array<double, kCutoffs.size()> hr{};
  std::array<double, kCutoffs.size()> ndcg{};
  std::size_t count = 0;

  double hr_at(std::uint32_t n) const;
  double ndcg_at(std::uint32_t n) const;
};

/// Means of HR@N and NDCG@N over the given ranks (zeros when empty).
MetricValues summarize(std::span<const std::uint32_t> ranks);

/// Assigns each entry to one of five buckets of roughly equal total count.
/// Entries are ordered by count ascending (ties by position) and cut where
/// the running sum crosses each fifth of the total.
std::vector<std::uint32_t> sparsity_buckets(std::span<const std::size_t> counts);

struct RankingCase {
  std::uint32_t user = 0;
  std::uint32_t positive = 0;
  std::vector<std::uint32_t> negatives;
  std::uint32_t rank = 0;
};

struct MetricsReport {
  MetricValues all;
  std::array<MetricValues, kNumBuckets> buckets{};
  std::vector<RankingCase> cases;
  std::vector<std::uint32_t> bucket_of_case;
};

/// Aggregates ranked cases; `train_counts[i]` is the train target-interaction
/// count of case i's user and drives the sparsity breakdown.
MetricsReport make_report(std::vector<RankingCase> cases, std::span<const std::size_t> train_counts);

/// CSV with header `metric,N,bucket,value`; bucket is `all` or `s1`..`s5`.
void write_metrics_csv(std::ostream& out, const MetricsReport& report);

}  // namespace khgt::eval
