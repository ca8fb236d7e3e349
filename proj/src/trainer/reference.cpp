#include "khgt/trainer/reference.hpp"

#include "khgt/data/subgraph.hpp"
#include "khgt/random.hpp"

namespace khgt::trainer {

TinyInstance tiny_instance(std::uint64_t seed) {
  TinyInstance t;
  const std::int64_t w = data::kSecondsPerWeek;
  t.log.num_users = 4;
  t.log.num_items = 6;
  t.log.num_behaviors = 2;
  // {user, item, behavior, timestamp}
  t.log.records = {
      {0, 0, 0, 1 * w}, {0, 1, 0, 2 * w}, {0, 2, 0, 3 * w + 5}, {0, 0, 1, 4 * w}, {0, 1, 1, 5 * w},
      {1, 1, 0, 1 * w}, {1, 3, 0, 6 * w}, {1, 4, 0, 7 * w},     {1, 3, 1, 8 * w}, {1, 4, 1, 9 * w},
      {2, 2, 0, 2 * w}, {2, 5, 0, 3 * w}, {2, 0, 0, 9 * w},     {2, 5, 1, 11 * w},
      {3, 4, 0, 1 * w}, {3, 5, 0, 4 * w}, {3, 3, 0, 6 * w},     {3, 2, 1, 7 * w}, {3, 4, 1, 12 * w},
  };
  t.interactions = data::build_user_item_graph(t.log, w);
  t.item_relations = data::item_graph_from_pairs(
      6, {{{0, 1}, {1, 3}, {3, 4}, {2, 5}}, {{0, 2}, {2, 5}, {4, 5}, {1, 3}, {0, 4}}},
      {{data::RelationKind::kCoInteraction, 0}, {data::RelationKind::kSharedCategory, 0}});
  t.hyper.dim = 8;
  t.hyper.heads = 2;
  t.hyper.channels = 2;
  t.hyper.layers = 1;
  t.hyper.behaviors = 2;
  t.hyper.relations = 2;
  t.hyper.users = 4;
  t.hyper.items = 6;
  const auto targets = data::target_items_by_user(t.log, 1);
  const std::vector<std::uint32_t> users{0, 1, 2, 3};
  t.pairs = sample_pairs(targets, 6, users, 1, derive_seed(seed, "tiny_pairs"));
  return t;
}

numerics::ModelFn pipeline_loss(std::shared_ptr<const model::PreparedGraph> graph, const model::Hyper& hyper,
                                std::vector<TrainingPair> pairs, double reg_weight, const model::Variant& variant) {
  numerics::Index users, positives, negatives;
  for (const auto& p : pairs) {
    users.push_back(p.user);
    positives.push_back(p.positive);
    negatives.push_back(p.negative);
  }
  auto u = numerics::share(std::move(users));
  auto pos = numerics::share(std::move(positives));
  auto neg = numerics::share(std::move(negatives));
  return [=](numerics::Tape& tape, const TensorMap& params) {
    const model::BoundParams bound = model::bind(tape, hyper, params);
    model::ForwardOptions options;
    options.variant = variant;
    const model::NodeEmbeddings emb = model::encode(bound, *graph, options);
    return hinge_loss(model::score_pairs(emb, bound.score, u, pos), model::score_pairs(emb, bound.score, u, neg),
                      bound.all, reg_weight);
  };
}

numerics::GradCheckResult check_tiny_gradients(double eps, std::uint64_t seed) {
  const TinyInstance t = tiny_instance(seed);
  auto graph = std::make_shared<const model::PreparedGraph>(
      model::prepare_graph(data::full_view(t.interactions, t.item_relations), t.hyper));
  const model::ModelParams params = model::init_params(t.hyper, derive_seed(seed, "params"));
  return numerics::grad_check(pipeline_loss(graph, t.hyper, t.pairs, 0.01), params.tensors, eps);
}

}  // namespace khgt::trainer
