#include "khgt/model/prepared_graph.hpp"

#include <cmath>

#include "khgt/errors.hpp"

namespace khgt::model {

using numerics::Index;
using numerics::share;

Tensor sinusoid(std::uint64_t slot, std::uint32_t dim) {
  Tensor t({2 * static_cast<std::size_t>(dim)});
  const double s = static_cast<double>(slot);
  const double d = static_cast<double>(dim);
  for (std::uint32_t l = 0; l < dim; ++l) {
    t[2 * l] = std::sin(s / std::pow(10000.0, (2.0 * l) / d));
    t[2 * l + 1] = std::cos(s / std::pow(10000.0, (2.0 * l + 1.0) / d));
  }
  return t;
}

TypeLayout TypeLayout::make(std::size_t nodes, std::size_t types) {
  TypeLayout l;
  l.nodes = nodes;
  l.types = types;
  Index q, k, owner(nodes * types);
  q.reserve(nodes * types * types);
  k.reserve(nodes * types * types);
  for (std::size_t n = 0; n < nodes; ++n)
    for (std::size_t t = 0; t < types; ++t)
      for (std::size_t t2 = 0; t2 < types; ++t2) {
        q.push_back(static_cast<std::uint32_t>(t * nodes + n));
        k.push_back(static_cast<std::uint32_t>(t2 * nodes + n));
      }
  for (std::size_t r = 0; r < owner.size(); ++r) owner[r] = static_cast<std::uint32_t>(r % nodes);
  l.query_rows = share(std::move(q));
  l.key_rows = share(std::move(k));
  l.node_of_row = share(std::move(owner));
  return l;
}

namespace {

Tensor norm_weights(const Index& a, const Index& b, const std::vector<std::size_t>& deg_a,
                    const std::vector<std::size_t>& deg_b, std::size_t heads) {
  Tensor w({a.size(), heads});
  for (std::size_t e = 0; e < a.size(); ++e) {
    const double v = 1.0 / std::sqrt(static_cast<double>(deg_a[a[e]]) * static_cast<double>(deg_b[b[e]]));
    for (std::size_t h = 0; h < heads; ++h) w[e * heads + h] = v;
  }
  return w;
}

}  // namespace

PreparedGraph prepare_graph(const data::SubGraph& graph, const Hyper& hyper) {
  const auto& ui = graph.interactions;
  const auto& ii = graph.item_relations;
  if (ui.num_behaviors != hyper.behaviors) {
    throw ContractError("graph has " + std::to_string(ui.num_behaviors) + " behavior types, model expects " +
                        std::to_string(hyper.behaviors));
  }
  if (ii.num_relations() != hyper.relations) {
    throw ContractError("graph has " + std::to_string(ii.num_relations()) + " item relations, model expects " +
                        std::to_string(hyper.relations));
  }
  for (auto u : graph.user_ids)
    if (u >= hyper.users) throw RangeError("graph user id " + std::to_string(u) + " exceeds the embedding table");
  for (auto j : graph.item_ids)
    if (j >= hyper.items) throw RangeError("graph item id " + std::to_string(j) + " exceeds the embedding table");

  PreparedGraph p;
  p.num_users = ui.num_users;
  p.num_items = ui.num_items;
  p.num_behaviors = ui.num_behaviors;
  p.num_relations = ii.num_relations();
  p.user_ids = share(graph.user_ids);
  p.item_ids = share(graph.item_ids);
  const std::size_t d = hyper.dim, H = hyper.heads;

  for (std::uint32_t k = 0; k < ui.num_behaviors; ++k) {
    const auto& csr = ui.by_user[k];
    Index users, items;
    std::vector<std::uint64_t> slots;
    std::vector<std::size_t> deg_u(ui.num_users, 0), deg_i(ui.num_items, 0);
    for (std::uint32_t u = 0; u < ui.num_users; ++u) {
      const auto nbrs = csr.neighbors_of(u);
      const auto s = csr.slots_of(u);
      for (std::size_t e = 0; e < nbrs.size(); ++e) {
        users.push_back(u);
        items.push_back(nbrs[e]);
        slots.push_back(s[e]);
        ++deg_u[u];
        ++deg_i[nbrs[e]];
      }
    }
    BehaviorEdges be;
    be.count = users.size();
    be.encoding = Tensor({be.count, 2 * d});
    for (std::size_t e = 0; e < be.count; ++e) {
      const Tensor row = sinusoid(slots[e], hyper.dim);
      std::copy(row.data().begin(), row.data().end(), be.encoding.data().begin() + e * 2 * d);
    }
    be.user_norm = norm_weights(users, items, deg_u, deg_i, H);
    be.users = share(std::move(users));
    be.items = share(std::move(items));
    p.behaviors.push_back(std::move(be));
  }

  for (const auto& csr : ii.relations) {
    Index targets, sources;
    std::vector<std::size_t> deg(ii.num_items, 0);
    for (std::uint32_t j = 0; j < csr.num_rows(); ++j) {
      deg[j] = csr.degree(j);
      for (std::uint32_t nb : csr.neighbors_of(j)) {
        targets.push_back(j);
        sources.push_back(nb);
      }
    }
    RelationEdges re;
    re.count = targets.size();
    re.norm = norm_weights(targets, sources, deg, deg, H);
    re.targets = share(std::move(targets));
    re.sources = share(std::move(sources));
    p.relations.push_back(std::move(re));
  }

  p.user_types = TypeLayout::make(p.num_users, p.num_behaviors);
  p.item_types = TypeLayout::make(p.num_items, p.num_behaviors + p.num_relations);
  p.item_behavior_types = TypeLayout::make(p.num_items, p.num_behaviors);
  p.item_relation_types = TypeLayout::make(p.num_items, p.num_relations);
  return p;
}

}  // namespace khgt::model
