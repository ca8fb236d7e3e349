#include "khgt/eval/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "khgt/data/subgraph.hpp"
#include "khgt/errors.hpp"
#include "khgt/random.hpp"

namespace khgt::eval {

using numerics::Tensor;

std::vector<std::uint32_t> sample_negatives(std::uint32_t user, std::uint32_t num_items,
                                            const std::vector<std::uint32_t>& interacted, std::uint64_t seed) {
  std::vector<std::uint32_t> pool;
  pool.reserve(num_items);
  for (std::uint32_t j = 0; j < num_items; ++j)
    if (!std::binary_search(interacted.begin(), interacted.end(), j)) pool.push_back(j);
  if (pool.size() < kNumNegatives) {
    throw ValidationError("user " + std::to_string(user) + " has only " + std::to_string(pool.size()) +
                          " non-interacted items; " + std::to_string(kNumNegatives) + " negatives are required");
  }
  Rng rng(seed, "negatives", user);
  for (std::size_t i = 0; i < kNumNegatives; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(kNumNegatives);
  return pool;
}

std::vector<RankingCase> build_cases(const data::Split& split, std::uint32_t num_items, std::uint64_t seed) {
  const auto targets = data::target_items_by_user(split.train, split.target_behavior);
  std::vector<RankingCase> cases;
  cases.reserve(split.test.size());
  for (const auto& held : split.test) {
    std::vector<std::uint32_t> interacted = held.user < targets.size() ? targets[held.user] : std::vector<std::uint32_t>{};
    interacted.insert(std::upper_bound(interacted.begin(), interacted.end(), held.item), held.item);
    interacted.erase(std::unique(interacted.begin(), interacted.end()), interacted.end());
    cases.push_back({held.user, held.item, sample_negatives(held.user, num_items, interacted, seed), 0});
  }
  return cases;
}

std::vector<std::size_t> train_counts(const data::Split& split, const std::vector<RankingCase>& cases) {
  const auto targets = data::target_items_by_user(split.train, split.target_behavior);
  std::vector<std::size_t> counts;
  counts.reserve(cases.size());
  for (const auto& c : cases) counts.push_back(c.user < targets.size() ? targets[c.user].size() : 0);
  return counts;
}

void rank_cases(std::vector<RankingCase>& cases, const CaseScorer& scorer, std::uint32_t workers) {
  auto rank_one = [&](RankingCase& c) {
    std::vector<std::uint32_t> items;
    items.reserve(c.negatives.size() + 1);
    items.push_back(c.positive);
    items.insert(items.end(), c.negatives.begin(), c.negatives.end());
    const std::vector<double> s = scorer(c.user, items);
    if (s.size() != items.size()) throw DimensionError("scorer returned the wrong number of scores");
    c.rank = rank_of_positive(s[0], c.positive, std::span(s).subspan(1), c.negatives);
  };
  workers = std::max<std::uint32_t>(1, std::min<std::uint32_t>(workers, static_cast<std::uint32_t>(cases.size())));
  if (workers <= 1) {
    for (auto& c : cases) rank_one(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::uint32_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < cases.size(); i = next++) {
        try {
          rank_one(cases[i]);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = cases.size();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

void check_dims(const model::ModelParams& params, const data::MultiBehaviorGraph& ui, const data::ItemRelationGraph& ii) {
  const model::Hyper& h = params.hyper;
  if (h.users != ui.num_users || h.items != ui.num_items || h.behaviors != ui.num_behaviors ||
      h.relations != ii.num_relations()) {
    throw ValidationError("model sizes (I=" + std::to_string(h.users) + ", J=" + std::to_string(h.items) +
                          ", K=" + std::to_string(h.behaviors) + ", R=" + std::to_string(h.relations) +
                          ") do not match the data (I=" + std::to_string(ui.num_users) +
                          ", J=" + std::to_string(ui.num_items) + ", K=" + std::to_string(ui.num_behaviors) +
                          ", R=" + std::to_string(ii.num_relations()) + ")");
  }
}

std::vector<double> score_rows(const model::EncodedGraph& enc, const Tensor& z, std::size_t user_row,
                               const std::vector<std::uint32_t>& item_rows) {
  std::vector<double> s;
  s.reserve(item_rows.size());
  for (auto j : item_rows) s.push_back(model::score(enc.users.row(user_row), enc.items.row(j), z.data()));
  return s;
}

}  // namespace

MetricsReport evaluate(const model::ModelParams& params, const data::MultiBehaviorGraph& ui,
                       const data::ItemRelationGraph& ii, const data::Split& split, const EvalConfig& config) {
  check_dims(params, ui, ii);
  std::vector<RankingCase> cases = build_cases(split, ui.num_items, config.seed);
  const Tensor& z = params.at(model::names::kScore);
  model::ForwardOptions options;
  options.variant = config.variant;

  if (static_cast<std::uint64_t>(ui.num_users) + ui.num_items <= config.full_graph_limit) {
    const model::PreparedGraph graph = model::prepare_graph(data::full_view(ui, ii), params.hyper);
    const model::EncodedGraph enc = model::encode_values(params, graph, options);
    rank_cases(
        cases, [&](std::uint32_t user, const std::vector<std::uint32_t>& items) { return score_rows(enc, z, user, items); },
        config.workers);
  } else {
    rank_cases(
        cases,
        [&](std::uint32_t user, const std::vector<std::uint32_t>& items) {
          const data::SubGraph sg = data::neighborhood_subgraph(ui, ii, {user}, items, params.hyper.layers);
          const model::EncodedGraph enc = model::encode_values(params, model::prepare_graph(sg, params.hyper), options);
          auto local = [](const std::vector<std::uint32_t>& ids, std::uint32_t id) {
            return static_cast<std::uint32_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
          };
          std::vector<std::uint32_t> rows;
          for (auto j : items) rows.push_back(local(sg.item_ids, j));
          return score_rows(enc, z, local(sg.user_ids, user), rows);
        },
        config.workers);
  }
  const auto counts = train_counts(split, cases);
  return make_report(std::move(cases), counts);
}

MetricsReport evaluate_random(const data::Split& split, std::uint32_t num_items, std::uint64_t seed) {
  std::vector<RankingCase> cases = build_cases(split, num_items, seed);
  rank_cases(
      cases,
      [&](std::uint32_t user, const std::vector<std::uint32_t>& items) {
        Rng rng(seed, "random_scorer", user);
        std::vector<double> s(items.size());
        for (double& x : s) x = rng.uniform();
        return s;
      },
      1);
  const auto counts = train_counts(split, cases);
  return make_report(std::move(cases), counts);
}

}  // namespace khgt::eval
