#include "khgt/model/params.hpp"

#include <cmath>

#include "khgt/errors.hpp"
#include "khgt/random.hpp"

namespace khgt::model {

using numerics::Shape;

void validate(const Hyper& h) {
  if (h.dim == 0 || h.heads == 0 || h.dim % h.heads != 0) {
    throw ContractError("dim " + std::to_string(h.dim) + " must be a positive multiple of heads " +
                        std::to_string(h.heads));
  }
  if (h.behaviors == 0) throw ContractError("at least one behavior type is required");
  if (h.channels == 0 || h.channels > h.behaviors) {
    throw ContractError("channels must lie in [1, behaviors], got " + std::to_string(h.channels));
  }
  if (h.layers == 0) throw ContractError("at least one propagation layer is required");
  if (h.users == 0 || h.items == 0) throw ContractError("user and item counts must be positive");
}

const Tensor& ModelParams::at(const std::string& name) const {
  const auto it = tensors.find(name);
  if (it == tensors.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ModelParams::at(const std::string& name) {
  const auto it = tensors.find(name);
  if (it == tensors.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ModelParams::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) n += t.size();
  return n;
}

namespace {

enum class Init { kUniform, kZero };

struct Entry {
  std::string name;
  Shape shape;
  Init init;
};

std::vector<Entry> layout(const Hyper& h) {
  const std::size_t d = h.dim, M = h.channels, K = h.behaviors, R = h.relations;
  std::vector<Entry> e{
      {names::kUserEmbedding, {h.users, d}, Init::kUniform},
      {names::kItemEmbedding, {h.items, d}, Init::kUniform},
      {names::kTimeProjection, {K, 2 * d, d}, Init::kUniform},
  };
  auto channels = [&](const std::string& prefix, std::size_t types) {
    for (const char* role : {"query", "key", "value"}) {
      e.push_back({prefix + "." + role + "_base", {M, d, d}, Init::kUniform});
      e.push_back({prefix + "." + role + "_gate", {types, M}, Init::kZero});
    }
  };
  channels("interaction", K);
  if (R > 0) channels("relation", R);
  for (const char* side : {"user_mutual", "item_mutual"})
    for (const char* role : {"query", "key", "value"}) e.push_back({std::string(side) + "." + role, {d, d}, Init::kUniform});
  for (const char* side : {"behavior", "relation"}) {
    const std::string p = std::string("fusion.") + side;
    e.push_back({p + ".B1", {d, d}, Init::kUniform});
    e.push_back({p + ".B2", {d, d}, Init::kUniform});
    e.push_back({p + ".c0", {1}, Init::kZero});
    e.push_back({p + ".c1", {d}, Init::kZero});
  }
  e.push_back({names::kFusionA0, {d}, Init::kUniform});
  e.push_back({names::kFusionB0, {d}, Init::kUniform});
  e.push_back({names::kScore, {d}, Init::kUniform});
  return e;
}

}  // namespace

ModelParams init_params(const Hyper& hyper, std::uint64_t seed) {
  validate(hyper);
  ModelParams p;
  p.hyper = hyper;
  const double s = 1.0 / std::sqrt(static_cast<double>(hyper.dim));
  Rng rng(seed, "init");
  for (const Entry& e : layout(hyper)) {
    Tensor t(e.shape);
    if (e.init == Init::kUniform) {
      for (double& x : t.data()) x = rng.uniform(-s, s);
    }
    p.tensors.emplace(e.name, std::move(t));
  }
  return p;
}

BoundParams bind(numerics::Tape& tape, const Hyper& hyper, const TensorMap& tensors) {
  BoundParams b;
  auto get = [&](const std::string& name) {
    const auto it = tensors.find(name);
    if (it == tensors.end()) throw ContractError("missing parameter '" + name + "'");
    b.all.push_back(tape.parameter(name, it->second));
    return b.all.back();
  };
  const std::size_t d = hyper.dim;
  b.hyper = hyper;
  b.user_embedding = get(names::kUserEmbedding);
  b.item_embedding = get(names::kItemEmbedding);
  b.time_projection = numerics::reshape(get(names::kTimeProjection), {hyper.behaviors * 2 * d, d});
  auto channels = [&](const std::string& prefix) {
    ChannelSet c;
    c.query_base = get(prefix + ".query_base");
    c.key_base = get(prefix + ".key_base");
    c.value_base = get(prefix + ".value_base");
    c.query_gate = get(prefix + ".query_gate");
    c.key_gate = get(prefix + ".key_gate");
    c.value_gate = get(prefix + ".value_gate");
    return c;
  };
  b.interaction = channels("interaction");
  if (hyper.relations > 0) b.relation = channels("relation");
  auto mutual = [&](const std::string& side) {
    return MutualSet{get(side + ".query"), get(side + ".key"), get(side + ".value")};
  };
  b.user_mutual = mutual("user_mutual");
  b.item_mutual = mutual("item_mutual");
  auto fusion = [&](const std::string& side, const char* weight) {
    const std::string p = "fusion." + side;
    return FusionSet{get(p + ".B1"), get(p + ".B2"), get(p + ".c1"), get(p + ".c0"), get(weight)};
  };
  b.behavior_fusion = fusion("behavior", names::kFusionA0);
  b.relation_fusion = fusion("relation", names::kFusionB0);
  b.score = get(names::kScore);
  return b;
}

}  // namespace khgt::model
