#include "khgt/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "khgt/errors.hpp"

namespace khgt::eval {

double hr_at_n(std::uint32_t rank, std::uint32_t n) {
  if (rank == 0) throw ContractError("ranks are 1-based");
  return rank <= n ? 1.0 : 0.0;
}

double ndcg_at_n(std::uint32_t rank, std::uint32_t n) {
  if (rank == 0) throw ContractError("ranks are 1-based");
  return rank <= n ? 1.0 / std::log2(1.0 + rank) : 0.0;
}

std::uint32_t rank_of_positive(double positive_score, std::uint32_t positive_item,
                               std::span<const double> negative_scores, std::span<const std::uint32_t> negative_items) {
  if (negative_scores.size() != negative_items.size()) throw DimensionError("rank_of_positive: unaligned negatives");
  std::uint32_t rank = 1;
  for (std::size_t i = 0; i < negative_scores.size(); ++i) {
    const double s = negative_scores[i];
    if (s > positive_score || (s == positive_score && negative_items[i] < positive_item)) ++rank;
  }
  return rank;
}

namespace {

std::size_t cutoff_index(std::uint32_t n) {
  const auto it = std::find(kCutoffs.begin(), kCutoffs.end(), n);
  if (it == kCutoffs.end()) throw ContractError("N=" + std::to_string(n) + " is not a reported cutoff");
  return static_cast<std::size_t>(it - kCutoffs.begin());
}

}  // namespace

double MetricValues::hr_at(std::uint32_t n) const { return hr[cutoff_index(n)]; }
double MetricValues::ndcg_at(std::uint32_t n) const { return ndcg[cutoff_index(n)]; }

MetricValues summarize(std::span<const std::uint32_t> ranks) {
  MetricValues m;
  m.count = ranks.size();
  if (ranks.empty()) return m;
  for (std::uint32_t r : ranks)
    for (std::size_t c = 0; c < kCutoffs.size(); ++c) {
      m.hr[c] += hr_at_n(r, kCutoffs[c]);
      m.ndcg[c] += ndcg_at_n(r, kCutoffs[c]);
    }
  for (std::size_t c = 0; c < kCutoffs.size(); ++c) {
    m.hr[c] /= static_cast<double>(ranks.size());
    m.ndcg[c] /= static_cast<double>(ranks.size());
  }
  return m;
}

std::vector<std::uint32_t> sparsity_buckets(std::span<const std::size_t> counts) {
  std::vector<std::size_t> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] < counts[b]; });
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  std::vector<std::uint32_t> bucket(counts.size(), 0);
  double before = 0.0;
  for (std::size_t i : order) {
    const double mid = before + 0.5 * static_cast<double>(counts[i]);
    const auto b = total > 0.0 ? static_cast<std::uint32_t>(kNumBuckets * mid / total) : 0u;
    bucket[i] = std::min<std::uint32_t>(b, kNumBuckets - 1);
    before += static_cast<double>(counts[i]);
  }
  return bucket;
}

MetricsReport make_report(std::vector<RankingCase> cases, std::span<const std::size_t> train_counts) {
  if (train_counts.size() != cases.size()) throw DimensionError("make_report: one train count per case expected");
  MetricsReport report;
  std::vector<std::uint32_t> ranks;
  ranks.reserve(cases.size());
  for (const auto& c : cases) ranks.push_back(c.rank);
  report.all = summarize(ranks);
  report.bucket_of_case = sparsity_buckets(train_counts);
  for (std::size_t b = 0; b < kNumBuckets; ++b) {
    std::vector<std::uint32_t> in_bucket;
    for (std::size_t i = 0; i < cases.size(); ++i)
      if (report.bucket_of_case[i] == b) in_bucket.push_back(ranks[i]);
    report.buckets[b] = summarize(in_bucket);
  }
  report.cases = std::move(cases);
  return report;
}

void write_metrics_csv(std::ostream& out, const MetricsReport& report) {
  out << "metric,N,bucket,value\n";
  const auto prec = out.precision(10);
  auto rows = [&](const MetricValues& m, const std::string& bucket) {
    for (std::size_t c = 0; c < kCutoffs.size(); ++c) out << "HR," << kCutoffs[c] << ',' << bucket << ',' << m.hr[c] << '\n';
    for (std::size_t c = 0; c < kCutoffs.size(); ++c)
      out << "NDCG," << kCutoffs[c] << ',' << bucket << ',' << m.ndcg[c] << '\n';
  };
  rows(report.all, "all");
  for (std::size_t b = 0; b < kNumBuckets; ++b) rows(report.buckets[b], "s" + std::to_string(b + 1));
  out.precision(prec);
}

}  // namespace khgt::eval
