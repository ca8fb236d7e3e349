#include "khgt/model/khgt.hpp"

#include <cmath>

#include "khgt/errors.hpp"
#include "khgt/random.hpp"

namespace khgt::model {

namespace ops = numerics;
using numerics::Index;
using numerics::Tape;

void NormalizationAudit::check_segments(const Tensor& probs, const Index& segments, std::size_t num_segments) {
  const std::size_t c = probs.cols();
  std::vector<double> totals(num_segments * c, 0.0);
  std::vector<bool> present(num_segments, false);
  for (std::size_t e = 0; e < segments.size(); ++e) {
    present[segments[e]] = true;
    for (std::size_t h = 0; h < c; ++h) totals[segments[e] * c + h] += probs[e * c + h];
  }
  for (std::size_t s = 0; s < num_segments; ++s) {
    if (!present[s]) continue;
    for (std::size_t h = 0; h < c; ++h) {
      const double dev = std::abs(totals[s * c + h] - 1.0);
      worst_deviation = std::max(worst_deviation, dev);
      ++groups_checked;
      if (!(dev <= tolerance)) throw NumericError("softmax group deviates from 1 by " + std::to_string(dev));
    }
  }
}

void NormalizationAudit::check_rows(const Tensor& probs) {
  const std::size_t c = probs.cols();
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += probs[r * c + j];
    const double dev = std::abs(total - 1.0);
    worst_deviation = std::max(worst_deviation, dev);
    ++groups_checked;
    if (!(dev <= tolerance)) throw NumericError("softmax row deviates from 1 by " + std::to_string(dev));
  }
}

Var temporal_encode(Var sinusoids, Var projection, std::uint32_t behavior, std::uint32_t dim) {
  const std::size_t rows = 2 * static_cast<std::size_t>(dim);
  return ops::matmul(sinusoids, ops::slice_rows(projection, behavior * rows, (behavior + 1) * rows));
}

ChannelGates channel_gates(const ChannelSet& channels, NormalizationAudit* audit) {
  ChannelGates g{ops::softmax_rows(channels.query_gate), ops::softmax_rows(channels.key_gate),
                 ops::softmax_rows(channels.value_gate)};
  if (audit) {
    audit->check_rows(g.alpha.value());
    audit->check_rows(g.beta.value());
    audit->check_rows(g.gamma.value());
  }
  return g;
}

namespace {

Var mix(Var gate, Var base, std::uint32_t type, std::uint32_t dim, bool gated) {
  const std::size_t d = dim;
  const std::size_t channels = base.shape()[0];
  Var flat = ops::reshape(base, {channels, d * d});
  Var row = gated ? ops::matmul(ops::slice_rows(gate, type, type + 1), flat) : ops::slice_rows(flat, 0, 1);
  return ops::reshape(row, {d, d});
}

Var zeros(Tape& tape, std::size_t rows, std::size_t cols) { return tape.constant(Tensor({rows, cols})); }

Var dropout(Var x, double rate, std::uint64_t seed, std::uint64_t stream) {
  Tensor mask(x.shape());
  Rng rng(seed, "dropout", stream);
  const double keep = 1.0 / (1.0 - rate);
  for (double& m : mask.data()) m = rng.uniform() < rate ? 0.0 : keep;
  return x * x.tape->constant(std::move(mask));
}

}  // namespace

TypeTransforms compose_type_transforms(const ChannelSet& channels, const ChannelGates& gates, std::uint32_t type,
                                       std::uint32_t dim, bool gated) {
  return {mix(gates.alpha, channels.query_base, type, dim, gated),
          mix(gates.beta, channels.key_base, type, dim, gated),
          mix(gates.gamma, channels.value_base, type, dim, gated)};
}

Attention attend(Var queries, Var keys, Var values, const SharedIndex& targets, std::size_t num_targets,
                 std::uint32_t heads, NormalizationAudit* audit) {
  const double factor = 1.0 / std::sqrt(static_cast<double>(values.shape()[1]) / heads);
  Var logits = ops::head_dot(queries, keys, heads, factor);
  Var weights = ops::segment_softmax(logits, targets, num_targets);
  if (audit) audit->check_segments(weights.value(), *targets, num_targets);
  Var messages = ops::head_scale(weights, values);
  return {ops::scatter_add_rows(messages, targets, num_targets), weights};
}

Attention convolve(Var values, const Tensor& weights, const SharedIndex& targets, std::size_t num_targets) {
  Var w = values.tape->constant(weights);
  return {ops::scatter_add_rows(ops::head_scale(w, values), targets, num_targets), w};
}

Var aggregate(Var summed) { return ops::leaky_relu(summed, kLeakySlope); }

MutualAttention mutual_attention(Var stacked, const TypeLayout& layout, const MutualSet& projections,
                                 std::uint32_t heads, NormalizationAudit* audit) {
  Var q = ops::gather_rows(ops::matmul_nt(stacked, projections.query), layout.query_rows);
  Var k = ops::gather_rows(ops::matmul_nt(stacked, projections.key), layout.key_rows);
  Var v = ops::gather_rows(ops::matmul_nt(stacked, projections.value), layout.key_rows);
  const std::size_t rows = layout.nodes * layout.types;
  Attention a = attend(q, k, v, layout.query_rows, rows, heads, audit);
  return {a.summed, a.weights};
}

Fusion gated_fusion(Var stacked, const TypeLayout& layout, const FusionSet& fusion, NormalizationAudit* audit) {
  const std::size_t d = stacked.shape()[1];
  Var totals = ops::scatter_add_rows(stacked, layout.node_of_row, layout.nodes);
  Var context = ops::gather_rows(totals, layout.node_of_row);
  Var f = ops::add_row_broadcast(ops::matmul_nt(stacked, fusion.b1) + ops::matmul_nt(context, fusion.b2), fusion.c1);
  Var logits = ops::add_row_broadcast(ops::matmul(f, ops::reshape(fusion.weight, {d, 1})), fusion.c0);
  Var gates = ops::segment_softmax(logits, layout.node_of_row, layout.nodes);
  if (audit) audit->check_segments(gates.value(), *layout.node_of_row, layout.nodes);
  Var out = ops::scatter_add_rows(ops::head_scale(gates, stacked), layout.node_of_row, layout.nodes);
  return {out, gates};
}

Var mean_fusion(Var stacked, const TypeLayout& layout) {
  return ops::scale(ops::scatter_add_rows(stacked, layout.node_of_row, layout.nodes),
                    1.0 / static_cast<double>(layout.types));
}

NodeEmbeddings initial_embeddings(const BoundParams& params, const PreparedGraph& graph) {
  return {ops::gather_rows(params.user_embedding, graph.user_ids),
          ops::gather_rows(params.item_embedding, graph.item_ids)};
}

NodeEmbeddings forward_layer(const BoundParams& params, const PreparedGraph& graph, const NodeEmbeddings& input,
                             std::uint32_t layer, const ForwardOptions& options) {
  const Hyper& hp = params.hyper;
  const Variant& variant = options.variant;
  const std::uint32_t d = hp.dim, H = hp.heads;
  const std::size_t I = graph.num_users, J = graph.num_items;
  Tape& tape = *input.users.tape;
  NormalizationAudit* audit = options.audit;

  std::vector<Var> user_parts, item_parts;
  const ChannelGates ui_gates = channel_gates(params.interaction, audit);
  for (std::uint32_t k = 0; k < graph.num_behaviors; ++k) {
    const BehaviorEdges& be = graph.behaviors[k];
    if (be.count == 0) {
      user_parts.push_back(zeros(tape, I, d));
      item_parts.push_back(zeros(tape, J, d));
      continue;
    }
    Var pu = ops::gather_rows(input.users, be.users);
    Var pi = ops::gather_rows(input.items, be.items);
    if (variant.temporal) {
      Var encoded = temporal_encode(tape.constant(be.encoding), params.time_projection, k, d);
      pu = pu + encoded;
      pi = pi + encoded;
    }
    const TypeTransforms t = compose_type_transforms(params.interaction, ui_gates, k, d, variant.channel_gates);
    Attention to_user, to_item;
    if (variant.attentive_aggregation) {
      to_user = attend(ops::matmul_nt(pu, t.query), ops::matmul_nt(pi, t.key), ops::matmul_nt(pi, t.value), be.users,
                       I, H, audit);
      to_item = attend(ops::matmul_nt(pi, t.query), ops::matmul_nt(pu, t.key), ops::matmul_nt(pu, t.value), be.items,
                       J, H, audit);
    } else {
      to_user = convolve(ops::matmul_nt(pi, t.value), be.user_norm, be.users, I);
      to_item = convolve(ops::matmul_nt(pu, t.value), be.user_norm, be.items, J);
    }
    user_parts.push_back(aggregate(to_user.summed));
    item_parts.push_back(aggregate(to_item.summed));
  }

  const bool use_relations = variant.item_relations && graph.num_relations > 0;
  if (use_relations) {
    const ChannelGates ii_gates = channel_gates(params.relation, audit);
    for (std::uint32_t r = 0; r < graph.num_relations; ++r) {
      const RelationEdges& re = graph.relations[r];
      if (re.count == 0) {
        item_parts.push_back(zeros(tape, J, d));
        continue;
      }
      Var target = ops::gather_rows(input.items, re.targets);
      Var source = ops::gather_rows(input.items, re.sources);
      const TypeTransforms t = compose_type_transforms(params.relation, ii_gates, r, d, variant.channel_gates);
      Attention a = variant.attentive_aggregation
                        ? attend(ops::matmul_nt(target, t.query), ops::matmul_nt(source, t.key),
                                 ops::matmul_nt(source, t.value), re.targets, J, H, audit)
                        : convolve(ops::matmul_nt(source, t.value), re.norm, re.targets, J);
      item_parts.push_back(aggregate(a.summed));
    }
  }

  const TypeLayout& item_layout = use_relations ? graph.item_types : graph.item_behavior_types;
  Var user_stack = ops::concat_rows(user_parts);
  Var item_stack = ops::concat_rows(item_parts);
  LayerTrace trace;
  if (variant.mutual_attention) {
    MutualAttention mu = mutual_attention(user_stack, graph.user_types, params.user_mutual, H, audit);
    MutualAttention mi = mutual_attention(item_stack, item_layout, params.item_mutual, H, audit);
    user_stack = mu.output;
    item_stack = mi.output;
    if (options.trace) {
      trace.user_relevance = mu.weights.value();
      trace.item_relevance = mi.weights.value();
    }
  }
  if (options.training && options.dropout > 0.0) {
    user_stack = dropout(user_stack, options.dropout, options.dropout_seed, 2ull * layer);
    item_stack = dropout(item_stack, options.dropout, options.dropout_seed, 2ull * layer + 1);
  }

  NodeEmbeddings out;
  const std::size_t behavior_rows = static_cast<std::size_t>(graph.num_behaviors) * J;
  Var item_behaviors = use_relations ? ops::slice_rows(item_stack, 0, behavior_rows) : item_stack;
  if (variant.gated_fusion) {
    Fusion fu = gated_fusion(user_stack, graph.user_types, params.behavior_fusion, audit);
    Fusion fi = gated_fusion(item_behaviors, graph.item_behavior_types, params.behavior_fusion, audit);
    out.users = fu.output;
    out.items = fi.output;
    if (options.trace) {
      trace.user_behavior_gates = fu.gates.value();
      trace.item_behavior_gates = fi.gates.value();
    }
    if (use_relations) {
      Var item_relations = ops::slice_rows(item_stack, behavior_rows, item_stack.shape()[0]);
      Fusion fr = gated_fusion(item_relations, graph.item_relation_types, params.relation_fusion, audit);
      out.items = out.items + fr.output;
      if (options.trace) trace.item_relation_gates = fr.gates.value();
    }
  } else {
    out.users = mean_fusion(user_stack, graph.user_types);
    out.items = mean_fusion(item_behaviors, graph.item_behavior_types);
    if (use_relations) {
      out.items = out.items + mean_fusion(ops::slice_rows(item_stack, behavior_rows, item_stack.shape()[0]),
                                          graph.item_relation_types);
    }
  }
  if (options.trace) {
    trace.item_types = item_layout.types;
    options.trace->layers.push_back(std::move(trace));
  }
  return out;
}

NodeEmbeddings encode(const BoundParams& params, const PreparedGraph& graph, const ForwardOptions& options) {
  if (params.hyper.layers == 0) throw ContractError("encode needs at least one layer");
  NodeEmbeddings current = initial_embeddings(params, graph);
  NodeEmbeddings total;
  for (std::uint32_t l = 0; l < params.hyper.layers; ++l) {
    current = forward_layer(params, graph, current, l, options);
    if (l == 0) {
      total = current;
    } else {
      total.users = total.users + current.users;
      total.items = total.items + current.items;
    }
  }
  return total;
}

Var score_pairs(const NodeEmbeddings& embeddings, Var z, const SharedIndex& users, const SharedIndex& items) {
  const std::size_t d = z.value().size();
  Var product = ops::gather_rows(embeddings.users, users) * ops::gather_rows(embeddings.items, items);
  return ops::matmul(product, ops::reshape(z, {d, 1}));
}

double score(std::span<const double> user, std::span<const double> item, std::span<const double> z) {
  if (user.size() != z.size() || item.size() != z.size()) throw DimensionError("score: embedding width mismatch");
  double s = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) s += z[c] * user[c] * item[c];
  return s;
}

EncodedGraph encode_values(const ModelParams& params, const PreparedGraph& graph, const ForwardOptions& options) {
  Tape tape;
  const BoundParams bound = bind(tape, params.hyper, params.tensors);
  const NodeEmbeddings e = encode(bound, graph, options);
  return {e.users.value(), e.items.value()};
}

}  // namespace khgt::model
