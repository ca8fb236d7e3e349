#include "khgt/data/graph.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <tuple>
#include <unordered_map>

#include "khgt/errors.hpp"
#include "khgt/random.hpp"

namespace khgt::data {

bool Csr::has_edge(std::uint32_t row, std::uint32_t col) const {
  const auto n = neighbors_of(row);
  return std::binary_search(n.begin(), n.end(), col);
}

Csr csr_from_edges(std::size_t rows, std::vector<Edge> edges, bool with_slots) {
  std::sort(edges.begin(), edges.end(),
            [](const Edge& a, const Edge& b) { return std::tie(a.source, a.target) < std::tie(b.source, b.target); });
  Csr csr;
  csr.offsets.assign(rows + 1, 0);
  csr.neighbors.reserve(edges.size());
  if (with_slots) csr.slots.reserve(edges.size());
  for (const Edge& e : edges) {
    if (e.source >= rows) throw RangeError("edge source " + std::to_string(e.source) + " out of range");
    ++csr.offsets[e.source + 1];
    csr.neighbors.push_back(e.target);
    if (with_slots) csr.slots.push_back(e.slot);
  }
  std::partial_sum(csr.offsets.begin(), csr.offsets.end(), csr.offsets.begin());
  return csr;
}

std::size_t MultiBehaviorGraph::num_edges() const {
  std::size_t n = 0;
  for (const auto& c : by_user) n += c.num_edges();
  return n;
}

std::size_t ItemRelationGraph::num_edges() const {
  std::size_t n = 0;
  for (const auto& c : relations) n += c.num_edges();
  return n;
}

MultiBehaviorGraph build_user_item_graph(const InteractionLog& log, std::int64_t resolution) {
  validate(log);
  MultiBehaviorGraph g;
  g.num_users = log.num_users;
  g.num_items = log.num_items;
  g.num_behaviors = log.num_behaviors;

  // (behavior, user, item) -> latest timestamp
  std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, std::int64_t> latest;
  for (const auto& r : log.records) {
    auto [it, inserted] = latest.emplace(std::make_tuple(r.behavior, r.user, r.item), r.timestamp);
    if (!inserted) it->second = std::max(it->second, r.timestamp);
  }
  std::vector<std::vector<Edge>> forward(g.num_behaviors), backward(g.num_behaviors);
  for (const auto& [key, ts] : latest) {
    const auto [k, u, v] = key;
    const std::uint64_t slot = time_slot(ts, resolution);
    forward[k].push_back({u, v, slot});
    backward[k].push_back({v, u, slot});
  }
  for (std::uint32_t k = 0; k < g.num_behaviors; ++k) {
    g.by_user.push_back(csr_from_edges(g.num_users, std::move(forward[k]), true));
    g.by_item.push_back(csr_from_edges(g.num_items, std::move(backward[k]), true));
  }
  return g;
}

namespace {

using Pair = std::pair<std::uint32_t, std::uint32_t>;

Csr symmetric_csr(std::uint32_t num_items, const std::vector<Pair>& pairs) {
  std::vector<Edge> edges;
  edges.reserve(pairs.size() * 2);
  for (const auto& [a, b] : pairs) {
    edges.push_back({a, b, 0});
    edges.push_back({b, a, 0});
  }
  return csr_from_edges(num_items, std::move(edges), false);
}

// Accepts candidate pairs in order while both endpoints are below the cap.
std::vector<Pair> greedy_capped(const std::vector<Pair>& candidates, std::uint32_t num_items, std::uint32_t cap) {
  std::vector<std::uint32_t> degree(num_items, 0);
  std::vector<Pair> kept;
  for (const auto& [a, b] : candidates) {
    if (degree[a] < cap && degree[b] < cap) {
      ++degree[a];
      ++degree[b];
      kept.emplace_back(a, b);
    }
  }
  return kept;
}

}  // namespace

ItemRelationGraph item_graph_from_pairs(std::uint32_t num_items, const std::vector<std::vector<Pair>>& pairs,
                                        std::vector<RelationInfo> info) {
  ItemRelationGraph g;
  g.num_items = num_items;
  for (const auto& list : pairs) {
    std::vector<Pair> clean;
    for (auto [a, b] : list) {
      if (a >= num_items || b >= num_items) throw RangeError("item pair out of range");
      if (a == b) continue;
      if (a > b) std::swap(a, b);
      clean.emplace_back(a, b);
    }
    std::sort(clean.begin(), clean.end());
    clean.erase(std::unique(clean.begin(), clean.end()), clean.end());
    g.relations.push_back(symmetric_csr(num_items, clean));
  }
  if (info.empty()) info.assign(pairs.size(), RelationInfo{});
  if (info.size() != pairs.size()) throw ContractError("relation info count mismatch");
  g.info = std::move(info);
  return g;
}

ItemRelationGraph build_item_item_graph(const InteractionLog& log, const std::vector<std::uint32_t>& categories,
                                        const ItemGraphParams& params) {
  validate(log);
  if (categories.size() != log.num_items) {
    throw ContractError("categories cover " + std::to_string(categories.size()) + " items, log has " +
                        std::to_string(log.num_items));
  }
  const std::uint32_t J = log.num_items;
  ItemRelationGraph g;
  g.num_items = J;

  for (std::uint32_t k = 0; k < log.num_behaviors; ++k) {
    std::vector<std::vector<std::uint32_t>> items_of(log.num_users);
    for (const auto& r : log.records) {
      if (r.behavior == k) items_of[r.user].push_back(r.item);
    }
    std::unordered_map<std::uint64_t, std::uint32_t> co_count;
    for (auto& items : items_of) {
      std::sort(items.begin(), items.end());
      items.erase(std::unique(items.begin(), items.end()), items.end());
      for (std::size_t a = 0; a < items.size(); ++a)
        for (std::size_t b = a + 1; b < items.size(); ++b)
          ++co_count[static_cast<std::uint64_t>(items[a]) * J + items[b]];
    }
    std::vector<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>> ranked;  // (count, a, b)
    for (const auto& [key, count] : co_count) {
      if (count >= params.min_co_count) {
        ranked.emplace_back(count, static_cast<std::uint32_t>(key / J), static_cast<std::uint32_t>(key % J));
      }
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
      if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) > std::get<0>(y);
      return std::tie(std::get<1>(x), std::get<2>(x)) < std::tie(std::get<1>(y), std::get<2>(y));
    });
    std::vector<Pair> candidates;
    candidates.reserve(ranked.size());
    for (const auto& [count, a, b] : ranked) candidates.emplace_back(a, b);
    g.relations.push_back(symmetric_csr(J, greedy_capped(candidates, J, params.cap)));
    g.info.push_back({RelationKind::kCoInteraction, k});
  }

  std::map<std::uint32_t, std::vector<std::uint32_t>> members;
  for (std::uint32_t j = 0; j < J; ++j) members[categories[j]].push_back(j);
  Rng rng(params.seed, "item_graph/category");
  std::vector<Pair> kept;
  for (const auto& [category, items] : members) {
    const std::size_t n = items.size();
    std::vector<Pair> candidates;
    if (n <= params.cap + 1) {
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) candidates.emplace_back(items[a], items[b]);
      kept.insert(kept.end(), candidates.begin(), candidates.end());
      continue;
    }
    if (n * (n - 1) / 2 <= 1'000'000) {
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) candidates.emplace_back(items[a], items[b]);
    } else {
      for (std::size_t a = 0; a < n; ++a)
        for (std::uint32_t t = 0; t < 4 * params.cap; ++t) {
          const std::size_t b = rng.below(n);
          if (b != a) candidates.emplace_back(std::min(items[a], items[b]), std::max(items[a], items[b]));
        }
      std::sort(candidates.begin(), candidates.end());
      candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    }
    rng.shuffle(candidates.begin(), candidates.end());
    const auto chosen = greedy_capped(candidates, J, params.cap);
    kept.insert(kept.end(), chosen.begin(), chosen.end());
  }
  g.relations.push_back(symmetric_csr(J, kept));
  g.info.push_back({RelationKind::kSharedCategory, 0});
  return g;
}

}  // namespace khgt::data
