#include "khgt/data/subgraph.hpp"

#include <algorithm>
#include <numeric>

#include "khgt/errors.hpp"
#include "khgt/random.hpp"

namespace khgt::data {

namespace {

constexpr std::uint32_t kAbsent = UINT32_MAX;

std::vector<std::uint32_t> local_map(std::size_t size, const std::vector<std::uint32_t>& ids) {
  std::vector<std::uint32_t> map(size, kAbsent);
  for (std::uint32_t i = 0; i < ids.size(); ++i) map[ids[i]] = i;
  return map;
}

void sort_unique(std::vector<std::uint32_t>& ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
}

}  // namespace

SubGraph full_view(const MultiBehaviorGraph& ui, const ItemRelationGraph& ii) {
  SubGraph s;
  s.user_ids.resize(ui.num_users);
  std::iota(s.user_ids.begin(), s.user_ids.end(), 0u);
  s.item_ids.resize(ui.num_items);
  std::iota(s.item_ids.begin(), s.item_ids.end(), 0u);
  s.interactions = ui;
  s.item_relations = ii;
  return s;
}

SubGraph induce_subgraph(const MultiBehaviorGraph& ui, const ItemRelationGraph& ii, std::vector<std::uint32_t> users,
                         std::vector<std::uint32_t> items) {
  sort_unique(users);
  sort_unique(items);
  for (auto u : users)
    if (u >= ui.num_users) throw RangeError("sub-graph user id out of range");
  for (auto j : items)
    if (j >= ui.num_items) throw RangeError("sub-graph item id out of range");

  const auto user_local = local_map(ui.num_users, users);
  const auto item_local = local_map(ui.num_items, items);
  SubGraph s;
  s.interactions.num_users = static_cast<std::uint32_t>(users.size());
  s.interactions.num_items = static_cast<std::uint32_t>(items.size());
  s.interactions.num_behaviors = ui.num_behaviors;
  for (std::uint32_t k = 0; k < ui.num_behaviors; ++k) {
    std::vector<Edge> forward, backward;
    const Csr& csr = ui.by_user[k];
    for (std::uint32_t lu = 0; lu < users.size(); ++lu) {
      const auto nbrs = csr.neighbors_of(users[lu]);
      const auto slots = csr.slots_of(users[lu]);
      for (std::size_t e = 0; e < nbrs.size(); ++e) {
        const std::uint32_t lj = item_local[nbrs[e]];
        if (lj == kAbsent) continue;
        forward.push_back({lu, lj, slots[e]});
        backward.push_back({lj, lu, slots[e]});
      }
    }
    s.interactions.by_user.push_back(csr_from_edges(users.size(), std::move(forward), true));
    s.interactions.by_item.push_back(csr_from_edges(items.size(), std::move(backward), true));
  }
  s.item_relations.num_items = static_cast<std::uint32_t>(items.size());
  s.item_relations.info = ii.info;
  for (const Csr& csr : ii.relations) {
    std::vector<Edge> edges;
    for (std::uint32_t lj = 0; lj < items.size(); ++lj) {
      for (std::uint32_t nb : csr.neighbors_of(items[lj])) {
        const std::uint32_t ln = item_local[nb];
        if (ln != kAbsent) edges.push_back({lj, ln, 0});
      }
    }
    s.item_relations.relations.push_back(csr_from_edges(items.size(), std::move(edges), false));
  }
  s.user_ids = std::move(users);
  s.item_ids = std::move(items);
  return s;
}

std::vector<std::vector<std::uint32_t>> combined_adjacency(const MultiBehaviorGraph& ui,
                                                           const ItemRelationGraph& ii) {
  const std::uint32_t I = ui.num_users;
  std::vector<std::vector<std::uint32_t>> adj(static_cast<std::size_t>(I) + ui.num_items);
  for (std::uint32_t k = 0; k < ui.num_behaviors; ++k) {
    const Csr& csr = ui.by_user[k];
    for (std::uint32_t u = 0; u < I; ++u) {
      for (std::uint32_t j : csr.neighbors_of(u)) {
        adj[u].push_back(I + j);
        adj[I + j].push_back(u);
      }
    }
  }
  for (const Csr& csr : ii.relations) {
    for (std::uint32_t j = 0; j < csr.num_rows(); ++j) {
      for (std::uint32_t nb : csr.neighbors_of(j)) adj[I + j].push_back(I + nb);
    }
  }
  for (auto& list : adj) sort_unique(list);
  return adj;
}

SubGraph sample_subgraph(const MultiBehaviorGraph& ui, const ItemRelationGraph& ii, std::uint32_t max_nodes,
                         double restart_prob, std::uint64_t seed) {
  if (max_nodes < 2) throw ContractError("sub-graph size must be at least 2");
  if (!(restart_prob > 0.0 && restart_prob < 1.0)) throw ContractError("restart probability must lie in (0, 1)");
  if (ui.num_edges() == 0) throw ContractError("cannot sample a sub-graph from a graph without edges");

  const std::uint32_t I = ui.num_users;
  const auto adj = combined_adjacency(ui, ii);
  std::vector<double> weight(adj.size());
  for (std::size_t n = 0; n < adj.size(); ++n) weight[n] = static_cast<double>(adj[n].size());

  std::vector<std::uint32_t> seeds;
  for (std::uint32_t u = 0; u < I; ++u)
    if (!adj[u].empty()) seeds.push_back(u);

  Rng rng(seed, "subgraph");
  const std::uint32_t start = seeds[rng.below(seeds.size())];
  std::vector<bool> selected(adj.size(), false);
  std::vector<std::uint32_t> order{start};
  selected[start] = true;
  weight[start] *= 0.9;

  std::uint32_t current = start;
  const std::uint64_t max_steps = 50ull * max_nodes;
  std::vector<double> cumulative;
  for (std::uint64_t step = 0; step < max_steps && order.size() < max_nodes; ++step) {
    if (rng.uniform() < restart_prob) {
      current = start;
      continue;
    }
    const auto& nbrs = adj[current];
    cumulative.resize(nbrs.size());
    double total = 0.0;
    for (std::size_t i = 0; i < nbrs.size(); ++i) cumulative[i] = total += weight[nbrs[i]];
    const double pick = rng.uniform() * total;
    const std::size_t at = std::min<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin(), nbrs.size() - 1);
    current = nbrs[at];
    weight[current] *= 0.9;
    if (!selected[current]) {
      selected[current] = true;
      order.push_back(current);
    }
  }

  std::vector<std::uint32_t> users, items;
  for (std::uint32_t n : order) {
    if (n < I) users.push_back(n);
    else items.push_back(n - I);
  }
  return induce_subgraph(ui, ii, std::move(users), std::move(items));
}

SubGraph neighborhood_subgraph(const MultiBehaviorGraph& ui, const ItemRelationGraph& ii,
                               const std::vector<std::uint32_t>& seed_users,
                               const std::vector<std::uint32_t>& seed_items, std::uint32_t hops) {
  const std::uint32_t I = ui.num_users;
  const auto adj = combined_adjacency(ui, ii);
  std::vector<bool> seen(adj.size(), false);
  std::vector<std::uint32_t> frontier;
  for (auto u : seed_users) {
    if (u >= I) throw RangeError("seed user out of range");
    if (!seen[u]) seen[u] = true, frontier.push_back(u);
  }
  for (auto j : seed_items) {
    if (j >= ui.num_items) throw RangeError("seed item out of range");
    if (!seen[I + j]) seen[I + j] = true, frontier.push_back(I + j);
  }
  std::vector<std::uint32_t> all = frontier;
  for (std::uint32_t h = 0; h < hops; ++h) {
    std::vector<std::uint32_t> next;
    for (auto n : frontier)
      for (auto m : adj[n])
        if (!seen[m]) seen[m] = true, next.push_back(m);
    all.insert(all.end(), next.begin(), next.end());
    frontier = std::move(next);
  }
  std::vector<std::uint32_t> users, items;
  for (auto n : all) {
    if (n < I) users.push_back(n);
    else items.push_back(n - I);
  }
  return induce_subgraph(ui, ii, std::move(users), std::move(items));
}

}  // namespace khgt::data
