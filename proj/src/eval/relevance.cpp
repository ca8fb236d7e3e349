#include "khgt/eval/relevance.hpp"

#include <ostream>
#include <string>

#include "khgt/errors.hpp"

namespace khgt::eval {

using numerics::Tensor;

namespace {

void lambda_rows(std::ostream& out, const char* node_type, std::uint32_t node, std::size_t layer, std::size_t types,
                 const Tensor& weights, std::uint32_t global_id) {
  if (weights.size() == 0) return;
  const std::size_t heads = weights.cols();
  for (std::size_t t = 0; t < types; ++t)
    for (std::size_t t2 = 0; t2 < types; ++t2) {
      const std::size_t row = node * types * types + t * types + t2;
      double mean = 0.0;
      for (std::size_t h = 0; h < heads; ++h) {
        const double w = weights.at(row, h);
        mean += w;
        out << node_type << ',' << global_id << ',' << layer << ',' << h << ',' << t << ',' << t2 << ',' << w << '\n';
      }
      out << node_type << ',' << global_id << ',' << layer << ",mean," << t << ',' << t2 << ','
          << mean / static_cast<double>(heads) << '\n';
    }
}

void gate_rows(std::ostream& out, const char* node_type, std::uint32_t node, std::size_t nodes, std::size_t layer,
               const char* gate, const Tensor& gates, std::uint32_t global_id) {
  if (gates.size() == 0) return;
  const std::size_t types = gates.rows() / nodes;
  for (std::size_t t = 0; t < types; ++t)
    out << node_type << ',' << global_id << ',' << layer << ',' << gate << ',' << t << ',' << gates.at(t * nodes + node, 0)
        << '\n';
}

}  // namespace

void export_relevance(const model::ModelParams& params, const model::PreparedGraph& graph,
                      const model::Variant& variant, std::span<const std::uint32_t> users,
                      std::span<const std::uint32_t> items, std::ostream& relevance, std::ostream& gates) {
  for (auto u : users)
    if (u >= graph.num_users) throw RangeError("user row " + std::to_string(u) + " is not in the graph");
  for (auto j : items)
    if (j >= graph.num_items) throw RangeError("item row " + std::to_string(j) + " is not in the graph");

  model::ForwardTrace trace;
  model::ForwardOptions options;
  options.variant = variant;
  options.trace = &trace;
  model::encode_values(params, graph, options);

  relevance << "node_type,node_id,layer,head,k,k_prime,weight\n";
  gates << "node_type,node_id,layer,gate,index,weight\n";
  const auto rprec = relevance.precision(10);
  const auto gprec = gates.precision(10);
  const std::size_t I = graph.num_users, J = graph.num_items, K = graph.num_behaviors;
  for (std::size_t l = 0; l < trace.layers.size(); ++l) {
    const model::LayerTrace& t = trace.layers[l];
    for (auto u : users) {
      lambda_rows(relevance, "user", u, l, K, t.user_relevance, (*graph.user_ids)[u]);
      gate_rows(gates, "user", u, I, l, "eta", t.user_behavior_gates, (*graph.user_ids)[u]);
    }
    for (auto j : items) {
      lambda_rows(relevance, "item", j, l, t.item_types, t.item_relevance, (*graph.item_ids)[j]);
      gate_rows(gates, "item", j, J, l, "eta", t.item_behavior_gates, (*graph.item_ids)[j]);
      gate_rows(gates, "item", j, J, l, "xi", t.item_relation_gates, (*graph.item_ids)[j]);
    }
  }
  relevance.precision(rprec);
  gates.precision(gprec);
}

}  // namespace khgt::eval
