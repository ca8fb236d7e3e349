#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "khgt/data/dataset.hpp"
#include "khgt/data/synthetic.hpp"
#include "khgt/errors.hpp"
#include "khgt/random.hpp"
#include "khgt/trainer/checkpoint.hpp"
#include "khgt/trainer/trainer.hpp"
#include "instances.hpp"

using namespace khgt;
using namespace khgt::trainer;
using numerics::Tensor;

namespace {

data::Dataset small_dataset(std::uint64_t seed, std::uint32_t users = 30, std::uint32_t items = 24) {
  data::SyntheticSpec spec;
  spec.users = users;
  spec.items = items;
  spec.correlation = 1.0;
  spec.noise = 0.0;
  spec.auxiliary_min = 4;
  spec.auxiliary_max = 10;
  const auto corpus = data::generate_synthetic(spec, seed);
  data::DatasetOptions o;
  o.target_behavior = spec.behaviors - 1;
  return data::build_dataset(corpus.log, corpus.categories, o);
}

TrainConfig quick_config() {
  TrainConfig c;
  c.dim = 8;
  c.layers = 1;
  c.epochs = 3;
  c.batch_size = 8;
  c.subgraph_nodes = 0;
  c.seed = 5;
  return c;
}

std::string checkpoint_bytes(const ModelParams& p) {
  std::ostringstream os;
  write_checkpoint(os, p);
  return os.str();
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("hinge examples") {
    const TensorMap none;
    const double two[] = {2.0}, zero[] = {0.0}, pos[] = {0.3}, neg[] = {0.5};
    CHECK(hinge_loss(two, zero, none, 0.0) == 0.0);
    const double same[] = {0.7, -1.5, 3.0};
    CHECK(hinge_loss(same, same, none, 0.0) == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(hinge_loss(pos, neg, none, 0.0) == doctest::Approx(1.2).epsilon(1e-15));
  }

  TEST_CASE("hinge on the tape agrees with plain values") {
    numerics::Tape tape;
    const Var w = tape.parameter("w", Tensor({2, 2}, {1.0, -2.0, 0.5, 0.0}));
    const Var p = tape.constant(Tensor({3, 1}, {0.3, 2.0, -1.0}));
    const Var n = tape.constant(Tensor({3, 1}, {0.5, 0.1, -1.0}));
    const Var params[] = {w};
    const Var loss = hinge_loss(p, n, params, 0.1);
    TensorMap map{{"w", w.value()}};
    const double ps[] = {0.3, 2.0, -1.0}, ns[] = {0.5, 0.1, -1.0};
    CHECK(loss.value()[0] == doctest::Approx(hinge_loss(ps, ns, map, 0.1)).epsilon(1e-15));
    CHECK(loss.value()[0] == doctest::Approx(1.2 + 0.0 + 1.0 + 0.1 * 5.25).epsilon(1e-15));
  }

  TEST_CASE("loss is never below the regularization term") {
    Rng rng(1);
    for (int trial = 0; trial < 500; ++trial) {
      TensorMap params{{"a", Tensor({3})}, {"b", Tensor({2, 2})}};
      double reg = 0.0;
      for (auto& [_, t] : params)
        for (double& x : t.data()) reg += (x = rng.normal()) * x;
      std::vector<double> ps(4), ns(4);
      for (std::size_t i = 0; i < 4; ++i) ps[i] = 5 * rng.normal(), ns[i] = 5 * rng.normal();
      const double lambda = rng.uniform(0.0, 0.2);
      const double loss = hinge_loss(ps, ns, params, lambda);
      CHECK(loss >= lambda * reg - 1e-12);
      CHECK(lambda * reg >= 0.0);
    }
  }

  TEST_CASE("unaligned score lists are rejected") {
    const double a[] = {1.0, 2.0}, b[] = {1.0};
    CHECK_THROWS_AS(hinge_loss(a, b, {}, 0.0), DimensionError);
  }

  TEST_CASE("zero gradients leave parameters unchanged") {
    TensorMap params{{"w", Tensor({2}, {0.5, -1.0})}};
    OptimizerState s = init_optimizer(params, 1e-3);
    numerics::GradientMap g{{"w", Tensor({2})}};
    for (int i = 0; i < 5; ++i) adam_step(params, g, s);
    CHECK(params.at("w")[0] == 0.5);
    CHECK(params.at("w")[1] == -1.0);
    CHECK(s.step == 5);
  }

  TEST_CASE("first Adam step moves by about the learning rate") {
    TensorMap params{{"w", Tensor({1}, {2.0})}};
    OptimizerState s = init_optimizer(params, 1e-3);
    adam_step(params, {{"w", Tensor({1}, {1.0})}}, s);
    // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
    CHECK(2.0 - params.at("w")[0] == doctest::Approx(1e-3 / (1.0 + 1e-8)).epsilon(1e-12));
  }

  TEST_CASE("learning rate decays per epoch") {
    TensorMap params{{"w", Tensor({1})}};
    OptimizerState s = init_optimizer(params, 1e-3);
    decay_learning_rate(s, 0.96);
    decay_learning_rate(s, 0.96);
    CHECK(s.learning_rate == doctest::Approx(9.216e-4).epsilon(1e-15));
  }

  TEST_CASE("non-finite gradient names the parameter and changes nothing") {
    TensorMap params{{"alpha", Tensor({1}, {1.0})}, {"beta", Tensor({2}, {1.0, 2.0})}};
    OptimizerState s = init_optimizer(params, 1e-3);
    numerics::GradientMap g{{"alpha", Tensor({1}, {1.0})}, {"beta", Tensor({2}, {0.0, std::nan("")})}};
    try {
      adam_step(params, g, s);
      FAIL("expected NumericError");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("beta") != std::string::npos);
    }
    CHECK(params.at("alpha")[0] == 1.0);
    CHECK(s.step == 0);
  }

  TEST_CASE("one Adam step decreases a convex proxy") {
    Rng rng(2);
    for (int trial = 0; trial < 200; ++trial) {
      const double target = rng.uniform(-5, 5);
      TensorMap params{{"w", Tensor({1}, {rng.uniform(-5, 5)})}};
      if (std::abs(params.at("w")[0] - target) < 1e-2) continue;
      auto f = [&] { return std::pow(params.at("w")[0] - target, 2); };
      const double before = f();
      OptimizerState s = init_optimizer(params, 1e-3);
      adam_step(params, {{"w", Tensor({1}, {2 * (params.at("w")[0] - target)})}}, s);
      CHECK(f() < before);
    }
  }

  TEST_CASE("a single positive is shared by every pair") {
    const std::vector<std::vector<std::uint32_t>> targets{{3}};
    const std::uint32_t users[] = {0};
    const auto pairs = sample_pairs(targets, 10, users, 2, 7);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].positive == 3);
    CHECK(pairs[1].positive == 3);
  }

  TEST_CASE("negatives stay outside the target set") {
    Rng rng(3);
    std::vector<std::vector<std::uint32_t>> targets(20);
    for (auto& t : targets) {
      std::set<std::uint32_t> s;
      const auto n = 1 + rng.below(8);
      while (s.size() < n) s.insert(static_cast<std::uint32_t>(rng.below(15)));
      t.assign(s.begin(), s.end());
    }
    std::vector<std::uint32_t> users(20);
    for (std::uint32_t u = 0; u < 20; ++u) users[u] = u;
    const auto pairs = sample_pairs(targets, 15, users, 500, 11);
    CHECK(pairs.size() == 10000);
    for (const auto& p : pairs) {
      const auto& t = targets[p.user];
      CHECK(std::binary_search(t.begin(), t.end(), p.positive));
      CHECK_FALSE(std::binary_search(t.begin(), t.end(), p.negative));
      CHECK(p.negative < 15);
    }
  }

  TEST_CASE("pair sampling is deterministic and skips users without targets") {
    const std::vector<std::vector<std::uint32_t>> targets{{1, 2}, {}, {0}};
    const std::uint32_t users[] = {0, 1, 2};
    const auto a = sample_pairs(targets, 6, users, 3, 99);
    CHECK(a == sample_pairs(targets, 6, users, 3, 99));
    CHECK(a.size() == 6);
    for (const auto& p : a) CHECK(p.user != 1);
    CHECK(a != sample_pairs(targets, 6, users, 3, 100));
  }

  TEST_CASE("candidate pools restrict both sides of a pair") {
    const std::vector<std::vector<std::uint32_t>> targets{{1, 4}};
    const std::uint32_t users[] = {0}, pool[] = {1, 2, 3};
    for (const auto& p : sample_pairs(targets, 6, users, 50, 4, pool)) {
      CHECK(p.positive == 1);
      CHECK((p.negative == 2 || p.negative == 3));
    }
  }

  TEST_CASE("config checks") {
    TrainConfig c;
    CHECK(check(c).empty());
    c.reg_weight = 0.02;
    CHECK(check(c).size() == 1);
    c = {};
    c.dim = 15;
    CHECK_THROWS_AS(check(c), ValidationError);
    c = {};
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(check(c), ValidationError);
    c = {};
    c.dropout = 1.0;
    CHECK_THROWS_AS(check(c), ValidationError);
  }

  TEST_CASE("zero epochs return the initialization") {
    const auto ds = small_dataset(1);
    TrainConfig c = quick_config();
    c.epochs = 0;
    const auto h = hyper_for(c, ds.interactions, ds.item_relations);
    const ModelParams init = model::init_params(h, 42);
    const TrainResult r = train_from(init, c, ds.split, ds.interactions, ds.item_relations);
    CHECK(r.history.empty());
    CHECK(checkpoint_bytes(r.params) == checkpoint_bytes(init));
  }

  TEST_CASE("training is deterministic in the seed") {
    const auto ds = small_dataset(2);
    TrainConfig c = quick_config();
    c.subgraph_nodes = 25;
    const TrainResult a = train(c, ds.split, ds.interactions, ds.item_relations);
    const TrainResult b = train(c, ds.split, ds.interactions, ds.item_relations);
    CHECK(checkpoint_bytes(a.params) == checkpoint_bytes(b.params));
    REQUIRE(a.history.size() == 3);
    for (std::size_t e = 0; e < 3; ++e) CHECK(a.history[e].mean_loss == b.history[e].mean_loss);
    c.seed = 6;
    CHECK(checkpoint_bytes(train(c, ds.split, ds.interactions, ds.item_relations).params) !=
          checkpoint_bytes(a.params));
  }

  TEST_CASE("epoch history records the decayed learning rate") {
    const auto ds = small_dataset(3);
    TrainConfig c = quick_config();
    std::vector<std::uint32_t> seen;
    const TrainResult r = train(c, ds.split, ds.interactions, ds.item_relations,
                                [&](const EpochStats& s) { seen.push_back(s.epoch); });
    CHECK(seen == std::vector<std::uint32_t>{1, 2, 3});
    for (const auto& s : r.history) {
      CHECK(s.learning_rate == doctest::Approx(1e-3 * std::pow(0.96, s.epoch - 1)).epsilon(1e-12));
      CHECK(s.mean_loss >= s.mean_hinge);
      CHECK(s.pairs > 0);
    }
  }

  TEST_CASE("checkpoint round trip preserves scores") {
    const auto inst = fixtures::make_instance({.users = 6, .items = 7, .behaviors = 2, .relations = 2, .dim = 8,
                                               .layers = 2},
                                              8);
    std::stringstream buf;
    write_checkpoint(buf, inst.params);
    const ModelParams back = read_checkpoint(buf);
    CHECK(back.hyper == inst.params.hyper);
    const auto g = model::prepare_graph(data::full_view(inst.ui, inst.ii), inst.params.hyper);
    const auto a = model::encode_values(inst.params, g, {});
    const auto b = model::encode_values(back, g, {});
    const auto za = inst.params.at("score.z").data(), zb = back.at("score.z").data();
    for (std::size_t u = 0; u < 6; ++u)
      for (std::size_t j = 0; j < 7; ++j) {
        const double sa = model::score(a.users.row(u), a.items.row(j), za);
        const double sb = model::score(b.users.row(u), b.items.row(j), zb);
        CHECK(std::abs(sa - sb) <= 1e-5 * std::max(1.0, std::abs(sa)));
      }
  }

  TEST_CASE("checkpoint layout starts with the magic and sizes") {
    const auto inst = fixtures::make_instance({}, 9);
    const std::string bytes = checkpoint_bytes(inst.params);
    REQUIRE(bytes.size() > 40);
    CHECK(bytes.substr(0, 4) == "KHGT");
    auto u32 = [&](std::size_t at) {
      std::uint32_t v = 0;
      for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[at + i]);
      return v;
    };
    CHECK(u32(4) == 1);
    const std::uint32_t want[] = {4, 2, 2, 1, 2, 1, 5, 6};
    for (std::size_t i = 0; i < 8; ++i) CHECK(u32(8 + 4 * i) == want[i]);
  }

  TEST_CASE("corrupt checkpoints are rejected") {
    const auto inst = fixtures::make_instance({}, 10);
    std::string bytes = checkpoint_bytes(inst.params);
    std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS(read_checkpoint(truncated));
    bytes[0] = 'X';
    std::istringstream bad_magic(bytes);
    CHECK_THROWS(read_checkpoint(bad_magic));
    CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.ckpt"), ValidationError);
  }

  TEST_CASE("loss history csv") {
    std::ostringstream os;
    write_loss_history(os, {{1, 0.5, 0.4, 1e-3, 10}, {2, 0.25, 0.2, 9.6e-4, 10}});
    const std::string s = os.str();
    CHECK(s.rfind("epoch,mean_loss,learning_rate\n", 0) == 0);
    CHECK(s.find("\n1,0.5,0.001\n") != std::string::npos);
  }

  TEST_CASE("overfit corpus: loss falls block by block and the hinge ends below 0.05") {
    const std::uint64_t seed = 1;
    data::SyntheticSpec spec;
    spec.users = 50;
    spec.items = 40;
    spec.correlation = 1.0;
    spec.noise = 0.0;
    const auto corpus = data::generate_synthetic(spec, derive_seed(seed, "synth"));
    data::DatasetOptions o;
    o.target_behavior = spec.behaviors - 1;
    o.item_graph.seed = derive_seed(seed, "item_graph");
    const auto ds = data::build_dataset(corpus.log, corpus.categories, o);

    TrainConfig c;
    c.layers = 1;
    c.epochs = 500;
    c.batch_size = 8;
    c.pairs_per_user = 48;
    c.learning_rate = 0.01;
    c.decay = 0.993;
    c.reg_weight = 0.0;
    c.dropout = 0.0;
    c.subgraph_nodes = 0;
    c.seed = seed;
    const TrainResult r = train(c, ds.split, ds.interactions, ds.item_relations);
    REQUIRE(r.history.size() == 500);

    std::vector<double> blocks;
    for (std::size_t e = 0; e < r.history.size(); e += 20) {
      double sum = 0.0;
      for (std::size_t i = e; i < e + 20; ++i) sum += r.history[i].mean_loss;
      blocks.push_back(sum / 20.0);
    }
    std::size_t falling = 0;
    for (std::size_t i = 1; i < blocks.size(); ++i)
      if (blocks[i] <= blocks[i - 1]) ++falling;
    MESSAGE("non-increasing 20-epoch blocks: " << falling << "/" << blocks.size() - 1);
    CHECK(falling >= 0.9 * static_cast<double>(blocks.size() - 1));
    CHECK(r.history.back().mean_hinge < 0.05);
  }
}
