#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "khgt/data/dataset.hpp"
#include "khgt/data/synthetic.hpp"
#include "khgt/errors.hpp"
#include "khgt/eval/evaluator.hpp"
#include "khgt/eval/metrics.hpp"
#include "khgt/eval/relevance.hpp"
#include "khgt/trainer/trainer.hpp"
#include "instances.hpp"

using namespace khgt;
using namespace khgt::eval;

namespace {

data::Dataset eval_dataset(std::uint64_t seed, std::uint32_t users = 30, std::uint32_t items = 120) {
  data::SyntheticSpec spec;
  spec.users = users;
  spec.items = items;
  spec.auxiliary_min = 4;
  spec.auxiliary_max = 10;
  const auto corpus = data::generate_synthetic(spec, seed);
  data::DatasetOptions o;
  o.target_behavior = spec.behaviors - 1;
  return data::build_dataset(corpus.log, corpus.categories, o);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, ',');) out.push_back(f);
  return out;
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("hit ratio examples") {
    CHECK(hr_at_n(1, 10) == 1.0);
    CHECK(hr_at_n(11, 10) == 0.0);
    CHECK(hr_at_n(10, 10) == 1.0);
    CHECK_THROWS_AS(hr_at_n(0, 10), ContractError);
  }

  TEST_CASE("ndcg examples") {
    CHECK(ndcg_at_n(1, 10) == 1.0);
    CHECK(ndcg_at_n(3, 10) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(ndcg_at_n(11, 10) == 0.0);
    CHECK_THROWS_AS(ndcg_at_n(0, 1), ContractError);
  }

  TEST_CASE("metrics match an exhaustive table") {
    for (std::uint32_t rank = 1; rank <= 100; ++rank)
      for (std::uint32_t n : kCutoffs) {
        const double hit = rank <= n ? 1.0 : 0.0;
        const double gain = rank <= n ? std::log(2.0) / std::log(1.0 + rank) : 0.0;
        CHECK(std::abs(hr_at_n(rank, n) - hit) <= 1e-12);
        CHECK(std::abs(ndcg_at_n(rank, n) - gain) <= 1e-12);
        CHECK(ndcg_at_n(rank, n) <= hr_at_n(rank, n));
      }
  }

  TEST_CASE("metrics are non-decreasing in the cutoff") {
    Rng rng(1);
    std::vector<std::uint32_t> ranks(300);
    for (auto& r : ranks) r = 1 + static_cast<std::uint32_t>(rng.below(100));
    const MetricValues m = summarize(ranks);
    for (std::size_t i = 1; i < kCutoffs.size(); ++i) {
      CHECK(m.hr[i] >= m.hr[i - 1]);
      CHECK(m.ndcg[i] >= m.ndcg[i - 1]);
    }
    for (std::size_t i = 0; i < kCutoffs.size(); ++i) {
      CHECK(m.ndcg[i] <= m.hr[i]);
      CHECK(m.hr[i] <= 1.0);
      CHECK(m.ndcg[i] >= 0.0);
    }
    CHECK(m.count == 300);
    CHECK(m.hr_at(10) == m.hr[5]);
  }

  TEST_CASE("rank counts higher scores and breaks ties by item id") {
    const double neg[] = {0.9, 0.5, 0.5, 0.1};
    const std::uint32_t items[] = {7, 2, 9, 4};
    CHECK(rank_of_positive(1.0, 5, neg, items) == 1);
    CHECK(rank_of_positive(0.5, 5, neg, items) == 3);  // above 9, below 2
    CHECK(rank_of_positive(0.5, 1, neg, items) == 2);
    CHECK(rank_of_positive(0.0, 5, neg, items) == 5);
  }

  TEST_CASE("raising the positive score never worsens its rank") {
    Rng rng(2);
    for (int trial = 0; trial < 500; ++trial) {
      std::vector<double> neg(99);
      std::vector<std::uint32_t> items(99);
      for (std::uint32_t i = 0; i < 99; ++i) {
        neg[i] = std::round(rng.uniform(-3, 3) * 4) / 4;
        items[i] = i + 1;
      }
      const double s = std::round(rng.uniform(-3, 3) * 4) / 4;
      const auto before = rank_of_positive(s, 50, neg, items);
      const auto after = rank_of_positive(s + rng.uniform(0.0, 1.0), 50, neg, items);
      CHECK(after <= before);
      CHECK(before >= 1);
      CHECK(before <= 100);
    }
  }

  TEST_CASE("a single interacted item leaves exactly the other 99") {
    const auto neg = sample_negatives(0, 100, {42}, 7);
    REQUIRE(neg.size() == 99);
    std::set<std::uint32_t> s(neg.begin(), neg.end());
    CHECK(s.size() == 99);
    CHECK(s.count(42) == 0);
  }

  TEST_CASE("negatives avoid the target set across many users") {
    Rng rng(3);
    for (std::uint32_t user = 0; user < 1000; ++user) {
      std::set<std::uint32_t> t;
      const auto n = 1 + rng.below(20);
      while (t.size() < n) t.insert(static_cast<std::uint32_t>(rng.below(150)));
      const std::vector<std::uint32_t> targets(t.begin(), t.end());
      const auto neg = sample_negatives(user, 150, targets, 11);
      CHECK(neg.size() == 99);
      std::set<std::uint32_t> s(neg.begin(), neg.end());
      CHECK(s.size() == 99);
      for (auto j : neg) {
        CHECK(t.count(j) == 0);
        CHECK(j < 150);
      }
      if (user % 100 == 0) CHECK(neg == sample_negatives(user, 150, targets, 11));
    }
  }

  TEST_CASE("too few candidates name the user") {
    try {
      sample_negatives(17, 100, {1, 2}, 0);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("17") != std::string::npos);
    }
  }

  TEST_CASE("cases hold the positive and 99 disjoint negatives") {
    const auto ds = eval_dataset(4);
    const auto cases = build_cases(ds.split, 120, 5);
    REQUIRE(cases.size() == ds.split.test.size());
    const auto train_targets = data::target_items_by_user(ds.split.train, ds.split.target_behavior);
    for (std::size_t i = 0; i < cases.size(); ++i) {
      CHECK(cases[i].user == ds.split.test[i].user);
      CHECK(cases[i].positive == ds.split.test[i].item);
      CHECK(cases[i].negatives.size() == 99);
      const auto& t = train_targets[cases[i].user];
      for (auto j : cases[i].negatives) {
        CHECK(j != cases[i].positive);
        CHECK_FALSE(std::binary_search(t.begin(), t.end(), j));
      }
    }
  }

  TEST_CASE("a perfect ranker scores one at every cutoff") {
    const auto ds = eval_dataset(5);
    auto cases = build_cases(ds.split, 120, 1);
    std::map<std::uint32_t, std::uint32_t> positive;
    for (const auto& c : cases) positive[c.user] = c.positive;
    rank_cases(
        cases,
        [&](std::uint32_t user, const std::vector<std::uint32_t>& items) {
          std::vector<double> s;
          for (auto j : items) s.push_back(j == positive.at(user) ? 1.0 : 0.0);
          return s;
        },
        3);
    const auto report = make_report(cases, train_counts(ds.split, cases));
    CHECK(report.all.hr_at(1) == 1.0);
    CHECK(report.all.ndcg_at(1) == 1.0);
  }

  TEST_CASE("one user ranked third") {
    data::Split split;
    split.train.num_users = 1;
    split.train.num_items = 120;
    split.train.num_behaviors = 1;
    split.train.records = {{0, 5, 0, 10}};
    split.test = {{0, 6, 20}};
    auto cases = build_cases(split, 120, 9);
    REQUIRE(cases.size() == 1);
    const std::uint32_t above[] = {cases[0].negatives[10], cases[0].negatives[40]};
    rank_cases(
        cases,
        [&](std::uint32_t, const std::vector<std::uint32_t>& items) {
          std::vector<double> s;
          for (auto j : items) s.push_back(j == 6 ? 0.5 : (j == above[0] || j == above[1]) ? 0.9 : 0.1);
          return s;
        },
        1);
    CHECK(cases[0].rank == 3);
    const auto report = make_report(cases, train_counts(split, cases));
    CHECK(report.all.hr_at(10) == 1.0);
    CHECK(report.all.ndcg_at(10) == doctest::Approx(0.5).epsilon(1e-15));
  }

  TEST_CASE("random scores hit the top ten about a tenth of the time") {
    const auto ds = eval_dataset(6, 700, 120);
    const auto report = evaluate_random(ds.split, 120, 3);
    REQUIRE(report.cases.size() >= 500);
    CHECK(report.all.hr_at(10) >= 0.07);
    CHECK(report.all.hr_at(10) <= 0.13);
  }

  TEST_CASE("equal counts fill the buckets evenly") {
    const std::vector<std::size_t> counts(10, 1);
    CHECK(sparsity_buckets(counts) == std::vector<std::uint32_t>{0, 0, 1, 1, 2, 2, 3, 3, 4, 4});
  }

  TEST_CASE("buckets carry roughly equal interaction mass") {
    Rng rng(7);
    std::vector<std::size_t> counts(2000);
    for (auto& c : counts) c = 1 + static_cast<std::size_t>(std::pow(rng.uniform(), 3) * 40);
    const auto b = sparsity_buckets(counts);
    std::array<double, 5> mass{};
    double total = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) mass[b[i]] += counts[i], total += counts[i];
    for (double m : mass) CHECK(std::abs(m / total - 0.2) < 0.02);
    for (std::size_t i = 0; i < counts.size(); ++i)
      for (std::size_t k = 0; k < counts.size(); k += 37)
        if (counts[i] < counts[k]) CHECK(b[i] <= b[k]);
  }

  TEST_CASE("metrics csv lists every cutoff and bucket") {
    std::vector<RankingCase> cases;
    std::vector<std::size_t> counts;
    for (std::uint32_t u = 0; u < 10; ++u) {
      cases.push_back({u, 0, {}, 1 + u});
      counts.push_back(1 + u);
    }
    const auto report = make_report(cases, counts);
    std::ostringstream os;
    write_metrics_csv(os, report);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "metric,N,bucket,value");
    std::size_t rows = 0;
    std::set<std::string> buckets;
    while (std::getline(in, line)) {
      const auto f = split_csv(line);
      REQUIRE(f.size() == 4);
      CHECK((f[0] == "HR" || f[0] == "NDCG"));
      buckets.insert(f[2]);
      ++rows;
    }
    CHECK(rows == 2 * 6 * 6);
    CHECK(buckets == std::set<std::string>{"all", "s1", "s2", "s3", "s4", "s5"});
  }

  TEST_CASE("model evaluation agrees between full graph and neighborhoods") {
    const auto ds = eval_dataset(8, 25, 120);
    trainer::TrainConfig c;
    c.dim = 8;
    c.layers = 2;
    const auto hyper = trainer::hyper_for(c, ds.interactions, ds.item_relations);
    const auto params = model::init_params(hyper, 3);
    EvalConfig full;
    full.seed = 4;
    EvalConfig local = full;
    local.full_graph_limit = 0;
    local.workers = 2;
    const auto a = evaluate(params, ds.interactions, ds.item_relations, ds.split, full);
    const auto b = evaluate(params, ds.interactions, ds.item_relations, ds.split, local);
    REQUIRE(a.cases.size() == b.cases.size());
    for (std::size_t i = 0; i < a.cases.size(); ++i) CHECK(a.cases[i].rank == b.cases[i].rank);
  }

  TEST_CASE("evaluation rejects mismatched parameters") {
    const auto ds = eval_dataset(9);
    model::Hyper h;
    h.dim = 8;
    h.behaviors = ds.interactions.num_behaviors;
    h.relations = ds.item_relations.num_relations();
    h.users = ds.interactions.num_users + 1;
    h.items = ds.interactions.num_items;
    h.layers = 1;
    CHECK_THROWS_AS(evaluate(model::init_params(h, 1), ds.interactions, ds.item_relations, ds.split, {}),
                    ValidationError);
  }

  TEST_CASE("relevance rows are normalized and complete") {
    const auto inst = fixtures::make_instance(
        {.users = 6, .items = 7, .behaviors = 3, .relations = 2, .dim = 8, .heads = 2, .layers = 2}, 10);
    const auto g = model::prepare_graph(data::full_view(inst.ui, inst.ii), inst.params.hyper);
    const std::uint32_t users[] = {0, 3}, items[] = {1, 4, 6};
    std::ostringstream rel, gates;
    export_relevance(inst.params, g, {}, users, items, rel, gates);

    std::istringstream in(rel.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "node_type,node_id,layer,head,k,k_prime,weight");
    std::map<std::string, double> row_sum;
    while (std::getline(in, line)) {
      const auto f = split_csv(line);
      REQUIRE(f.size() == 7);
      row_sum[f[0] + "/" + f[1] + "/" + f[2] + "/" + f[3] + "/" + f[4]] += std::stod(f[6]);
    }
    std::size_t head_rows = 0;
    for (const auto& [key, s] : row_sum) {
      CHECK(std::abs(s - 1.0) <= 1e-6);
      if (key.find("/mean/") == std::string::npos) ++head_rows;
    }
    // users: 2 nodes x 2 layers x 2 heads x 3 types; items: 3 x 2 x 2 x 5
    CHECK(head_rows == 2 * 2 * 2 * 3 + 3 * 2 * 2 * 5);

    std::istringstream gin(gates.str());
    std::getline(gin, line);
    CHECK(line == "node_type,node_id,layer,gate,index,weight");
    std::map<std::string, double> gate_sum;
    while (std::getline(gin, line)) {
      const auto f = split_csv(line);
      REQUIRE(f.size() == 6);
      CHECK((f[3] == "eta" || f[3] == "xi"));
      gate_sum[f[0] + "/" + f[1] + "/" + f[2] + "/" + f[3]] += std::stod(f[5]);
    }
    for (const auto& [_, s] : gate_sum) CHECK(std::abs(s - 1.0) <= 1e-6);
    CHECK(gate_sum.size() == 2 * 2 + 3 * 2 * 2);
  }

  TEST_CASE("single behavior relevance is one") {
    const auto inst = fixtures::make_instance({.behaviors = 1, .relations = 0, .channels = 1}, 11);
    const auto g = model::prepare_graph(data::full_view(inst.ui, inst.ii), inst.params.hyper);
    const std::uint32_t users[] = {1}, items[] = {2};
    std::ostringstream rel, gates;
    export_relevance(inst.params, g, {}, users, items, rel, gates);
    std::istringstream in(rel.str());
    std::string line;
    std::getline(in, line);
    std::size_t n = 0;
    while (std::getline(in, line)) {
      CHECK(std::stod(split_csv(line)[6]) == 1.0);
      ++n;
    }
    CHECK(n == 2 * 3);  // 2 nodes x (2 heads + mean)
  }
}
