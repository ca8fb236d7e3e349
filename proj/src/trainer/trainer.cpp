#include "khgt/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "khgt/data/subgraph.hpp"
#include "khgt/errors.hpp"
#include "khgt/random.hpp"

namespace khgt::trainer {

namespace ops = numerics;
using numerics::Tensor;

std::vector<std::string> check(const TrainConfig& c) {
  if (c.dim == 0 || c.heads == 0 || c.dim % c.heads != 0) throw ValidationError("dim must be a positive multiple of heads");
  if (c.channels == 0) throw ValidationError("channels must be positive");
  if (c.layers == 0) throw ValidationError("layers must be positive");
  if (!(c.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(c.decay > 0.0 && c.decay <= 1.0)) throw ValidationError("decay must lie in (0, 1]");
  if (c.batch_size == 0) throw ValidationError("batch size must be positive");
  if (c.pairs_per_user == 0) throw ValidationError("pairs per user must be positive");
  if (!(c.reg_weight >= 0.0)) throw ValidationError("regularization weight must be non-negative");
  if (c.time_resolution <= 0) throw ValidationError("time resolution must be positive");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw ValidationError("dropout must lie in [0, 1)");
  if (!(c.restart_prob > 0.0 && c.restart_prob < 1.0)) throw ValidationError("restart probability must lie in (0, 1)");
  if (c.subgraph_nodes == 1) throw ValidationError("sub-graph size must be 0 or at least 2");

  std::vector<std::string> notes;
  if (std::none_of(std::begin(kRegGrid), std::end(kRegGrid), [&](double g) { return std::abs(g - c.reg_weight) < 1e-12; })) {
    notes.push_back("reg weight " + std::to_string(c.reg_weight) +
                    " is outside the usual grid {0.1, 0.05, 0.01, 0.005, 0.001}");
  }
  return notes;
}

model::Hyper hyper_for(const TrainConfig& config, const data::MultiBehaviorGraph& ui,
                       const data::ItemRelationGraph& ii) {
  model::Hyper h;
  h.dim = config.dim;
  h.heads = config.heads;
  h.channels = std::min(config.channels, ui.num_behaviors);
  h.layers = config.layers;
  h.behaviors = ui.num_behaviors;
  h.relations = ii.num_relations();
  h.users = ui.num_users;
  h.items = ui.num_items;
  return h;
}

std::vector<TrainingPair> sample_pairs(const std::vector<std::vector<std::uint32_t>>& target_sets,
                                       std::uint32_t num_items, std::span<const std::uint32_t> users,
                                       std::uint32_t per_user, std::uint64_t seed,
                                       std::span<const std::uint32_t> candidates) {
  std::vector<bool> allowed;
  std::size_t pool_size = num_items;
  if (!candidates.empty()) {
    allowed.assign(num_items, false);
    for (auto j : candidates) allowed[j] = true;
    pool_size = static_cast<std::size_t>(std::count(allowed.begin(), allowed.end(), true));
  }
  auto in_pool = [&](std::uint32_t j) { return allowed.empty() || allowed[j]; };

  std::vector<TrainingPair> pairs;
  for (std::uint32_t u : users) {
    const auto& positives = target_sets.at(u);
    if (positives.empty()) continue;
    std::size_t positives_in_pool = 0;
    for (auto j : positives) positives_in_pool += in_pool(j) ? 1 : 0;
    if (positives_in_pool >= pool_size) continue;  // no negative candidates
    Rng rng(seed, "pairs", u);
    for (std::uint32_t s = 0; s < per_user; ++s) {
      const std::uint32_t pos = positives[rng.below(positives.size())];
      std::uint32_t neg;
      if (allowed.empty()) {
        do {
          neg = static_cast<std::uint32_t>(rng.below(num_items));
        } while (std::binary_search(positives.begin(), positives.end(), neg));
      } else {
        do {
          neg = candidates[rng.below(candidates.size())];
        } while (std::binary_search(positives.begin(), positives.end(), neg));
      }
      if (!in_pool(pos)) continue;
      pairs.push_back({u, pos, neg});
    }
  }
  return pairs;
}

Var hinge_loss(Var positive_scores, Var negative_scores, std::span<const Var> params, double reg_weight) {
  Var loss = ops::sum(ops::relu(ops::add_constant(negative_scores - positive_scores, 1.0)));
  if (reg_weight != 0.0 && !params.empty()) {
    Var reg = ops::sum_squares(params[0]);
    for (std::size_t i = 1; i < params.size(); ++i) reg = reg + ops::sum_squares(params[i]);
    loss = loss + ops::scale(reg, reg_weight);
  }
  return loss;
}

double hinge_loss(std::span<const double> positive_scores, std::span<const double> negative_scores,
                  const TensorMap& params, double reg_weight) {
  if (positive_scores.size() != negative_scores.size()) throw DimensionError("hinge_loss: unaligned score lists");
  double loss = 0.0;
  for (std::size_t i = 0; i < positive_scores.size(); ++i) {
    loss += std::max(0.0, 1.0 - positive_scores[i] + negative_scores[i]);
  }
  double reg = 0.0;
  for (const auto& [name, t] : params)
    for (double x : t.data()) reg += x * x;
  return loss + reg_weight * reg;
}

OptimizerState init_optimizer(const TensorMap& params, double learning_rate) {
  OptimizerState s;
  s.learning_rate = learning_rate;
  for (const auto& [name, t] : params) {
    s.first_moment.emplace(name, Tensor(t.shape()));
    s.second_moment.emplace(name, Tensor(t.shape()));
  }
  return s;
}

void adam_step(TensorMap& params, const GradientMap& grads, OptimizerState& state, const AdamConfig& adam) {
  for (const auto& [name, p] : params) {
    const auto g = grads.find(name);
    if (g == grads.end()) throw ContractError("no gradient for parameter '" + name + "'");
    if (g->second.shape() != p.shape()) throw DimensionError("gradient shape mismatch for '" + name + "'");
    if (!g->second.all_finite()) throw NumericError("non-finite gradient for parameter '" + name + "'");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(adam.beta1, t);
  const double c2 = 1.0 - std::pow(adam.beta2, t);
  for (auto& [name, p] : params) {
    const Tensor& g = grads.at(name);
    Tensor& m = state.first_moment.at(name);
    Tensor& v = state.second_moment.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * g[i];
      v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + adam.epsilon);
    }
  }
}

void decay_learning_rate(OptimizerState& state, double decay) { state.learning_rate *= decay; }

TrainResult train(const TrainConfig& config, const data::Split& split, const data::MultiBehaviorGraph& ui,
                  const data::ItemRelationGraph& ii, const EpochCallback& on_epoch) {
  check(config);
  return train_from(model::init_params(hyper_for(config, ui, ii), derive_seed(config.seed, "params")), config, split,
                    ui, ii, on_epoch);
}

TrainResult train_from(ModelParams initial, const TrainConfig& config, const data::Split& split,
                       const data::MultiBehaviorGraph& ui, const data::ItemRelationGraph& ii,
                       const EpochCallback& on_epoch) {
  check(config);
  if (split.train.records.empty()) throw ValidationError("training split is empty");
  TrainResult result{std::move(initial), {}};
  ModelParams& params = result.params;
  const model::Hyper& hyper = params.hyper;
  if (hyper.users != ui.num_users || hyper.items != ui.num_items || hyper.behaviors != ui.num_behaviors ||
      hyper.relations != ii.num_relations()) {
    throw ContractError("initial parameters do not match the graphs");
  }

  const auto targets = data::target_items_by_user(split.train, split.target_behavior);
  std::vector<std::uint32_t> train_users;
  for (std::uint32_t u = 0; u < targets.size(); ++u)
    if (!targets[u].empty()) train_users.push_back(u);
  if (train_users.empty()) throw ValidationError("no user has a target-behavior interaction in train");

  const bool full_graph = config.subgraph_nodes == 0 ||
                          config.subgraph_nodes >= static_cast<std::uint64_t>(ui.num_users) + ui.num_items;
  std::optional<model::PreparedGraph> full;
  if (full_graph) full = model::prepare_graph(data::full_view(ui, ii), hyper);

  OptimizerState state = init_optimizer(params.tensors, config.learning_rate);
  const std::size_t steps = (train_users.size() + config.batch_size - 1) / config.batch_size;
  std::uint64_t global_step = 0;

  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::uint32_t> order = train_users;
    Rng(config.seed, "epoch_order", epoch).shuffle(order.begin(), order.end());
    double hinge_total = 0.0, reg_total = 0.0;
    std::size_t pair_total = 0, active_steps = 0;
    const double epoch_lr = state.learning_rate;

    for (std::size_t step = 0; step < steps; ++step, ++global_step) {
      std::vector<std::uint32_t> batch;
      std::optional<model::PreparedGraph> sampled;
      std::vector<std::uint32_t> user_local, item_local;
      std::vector<std::uint32_t> pool;
      if (full_graph) {
        const std::size_t begin = step * config.batch_size;
        const std::size_t end = std::min(order.size(), begin + config.batch_size);
        batch.assign(order.begin() + begin, order.begin() + end);
      } else {
        const data::SubGraph sg = data::sample_subgraph(ui, ii, config.subgraph_nodes, config.restart_prob,
                                                        derive_seed(config.seed, "subgraph", global_step));
        sampled = model::prepare_graph(sg, hyper);
        user_local.assign(ui.num_users, UINT32_MAX);
        item_local.assign(ui.num_items, UINT32_MAX);
        for (std::uint32_t i = 0; i < sg.user_ids.size(); ++i) user_local[sg.user_ids[i]] = i;
        for (std::uint32_t i = 0; i < sg.item_ids.size(); ++i) item_local[sg.item_ids[i]] = i;
        for (auto u : sg.user_ids)
          if (!targets[u].empty()) batch.push_back(u);
        Rng(config.seed, "batch_order", global_step).shuffle(batch.begin(), batch.end());
        if (batch.size() > config.batch_size) batch.resize(config.batch_size);
        std::sort(batch.begin(), batch.end());
        pool = sg.item_ids;
      }
      const auto pairs = sample_pairs(targets, ui.num_items, batch, config.pairs_per_user,
                                      derive_seed(config.seed, "pair_step", global_step), pool);
      if (pairs.empty()) continue;
      const model::PreparedGraph& graph = full_graph ? *full : *sampled;

      numerics::Index users, positives, negatives;
      for (const auto& p : pairs) {
        users.push_back(full_graph ? p.user : user_local[p.user]);
        positives.push_back(full_graph ? p.positive : item_local[p.positive]);
        negatives.push_back(full_graph ? p.negative : item_local[p.negative]);
      }
      numerics::Tape tape;
      const model::BoundParams bound = model::bind(tape, hyper, params.tensors);
      model::ForwardOptions options;
      options.variant = config.variant;
      options.training = true;
      options.dropout = config.dropout;
      options.dropout_seed = derive_seed(config.seed, "dropout", global_step);
      const model::NodeEmbeddings emb = model::encode(bound, graph, options);
      const auto user_index = numerics::share(std::move(users));
      Var pos = model::score_pairs(emb, bound.score, user_index, numerics::share(std::move(positives)));
      Var neg = model::score_pairs(emb, bound.score, user_index, numerics::share(std::move(negatives)));
      Var hinge = hinge_loss(pos, neg, {}, 0.0);
      Var loss = hinge_loss(pos, neg, bound.all, config.reg_weight);
      if (!std::isfinite(loss.value()[0])) throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
      const GradientMap grads = tape.backward(loss);
      adam_step(params.tensors, grads, state);

      hinge_total += hinge.value()[0];
      reg_total += loss.value()[0] - hinge.value()[0];
      pair_total += pairs.size();
      ++active_steps;
    }

    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.pairs = pair_total;
    stats.learning_rate = epoch_lr;
    stats.mean_hinge = pair_total ? hinge_total / static_cast<double>(pair_total) : 0.0;
    stats.mean_loss = stats.mean_hinge + (active_steps ? reg_total / static_cast<double>(active_steps) : 0.0);
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
    decay_learning_rate(state, config.decay);
  }
  return result;
}

}  // namespace khgt::trainer
