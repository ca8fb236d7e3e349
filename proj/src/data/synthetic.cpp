#include "khgt/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "khgt/errors.hpp"
#include "khgt/random.hpp"

namespace khgt::data {

namespace {

std::vector<std::uint32_t> top_n(const std::vector<double>& scores, std::uint32_t n) {
  std::vector<std::uint32_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0u);
  n = std::min<std::uint32_t>(n, static_cast<std::uint32_t>(order.size()));
  std::partial_sort(order.begin(), order.begin() + n, order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
  });
  order.resize(n);
  return order;
}

std::uint32_t uniform_count(Rng& rng, std::uint32_t lo, std::uint32_t hi) {
  return lo + static_cast<std::uint32_t>(rng.below(hi - lo + 1));
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (!(spec.correlation >= 0.0 && spec.correlation <= 1.0)) throw ContractError("correlation must lie in [0, 1]");
  if (spec.behaviors < 1 || spec.users == 0 || spec.items == 0 || spec.latent_dim == 0) {
    throw ContractError("synthetic corpus needs users, items, behaviors and latent_dim > 0");
  }
  if (spec.target_min > spec.target_max || spec.auxiliary_min > spec.auxiliary_max || spec.target_min == 0) {
    throw ContractError("synthetic interaction count range is empty");
  }
  const std::uint32_t f = spec.latent_dim;
  const double norm = 1.0 / std::sqrt(static_cast<double>(f));
  Rng factors(seed, "synthetic/factors");
  std::vector<double> user_f(static_cast<std::size_t>(spec.users) * f), item_f(static_cast<std::size_t>(spec.items) * f);
  for (double& x : user_f) x = factors.normal() * norm;
  for (double& x : item_f) x = factors.normal() * norm;

  SyntheticCorpus corpus;
  corpus.categories.resize(spec.items);
  const std::uint32_t num_categories = std::max<std::uint32_t>(1, spec.categories);
  for (std::uint32_t j = 0; j < spec.items; ++j) {
    const double* v = item_f.data() + static_cast<std::size_t>(j) * f;
    corpus.categories[j] = static_cast<std::uint32_t>(std::max_element(v, v + f) - v) % num_categories;
  }

  InteractionLog& log = corpus.log;
  log.num_users = spec.users;
  log.num_items = spec.items;
  log.num_behaviors = spec.behaviors;
  const std::uint32_t target = spec.behaviors - 1;
  const double rho = spec.correlation;

  for (std::uint32_t u = 0; u < spec.users; ++u) {
    Rng rng(seed, "synthetic/user", u);
    const double* uf = user_f.data() + static_cast<std::size_t>(u) * f;
    std::vector<double> propensity(spec.items);
    for (std::uint32_t j = 0; j < spec.items; ++j) {
      const double* vf = item_f.data() + static_cast<std::size_t>(j) * f;
      double s = 0.0;
      for (std::uint32_t c = 0; c < f; ++c) s += uf[c] * vf[c];
      propensity[j] = s + spec.noise * rng.normal();
    }
    const double mean = std::accumulate(propensity.begin(), propensity.end(), 0.0) / spec.items;
    double var = 0.0;
    for (double p : propensity) var += (p - mean) * (p - mean);
    const double sd = std::sqrt(var / spec.items);
    std::vector<double> standardized(spec.items);
    for (std::uint32_t j = 0; j < spec.items; ++j) {
      standardized[j] = sd > 0.0 ? (propensity[j] - mean) / sd : 0.0;
    }

    std::vector<std::pair<std::uint32_t, std::uint32_t>> events;  // (item, behavior)
    for (std::uint32_t j : top_n(propensity, uniform_count(rng, spec.target_min, spec.target_max))) {
      events.emplace_back(j, target);
    }
    for (std::uint32_t b = 0; b < target; ++b) {
      std::vector<double> mixed(spec.items);
      for (std::uint32_t j = 0; j < spec.items; ++j) {
        mixed[j] = rho * standardized[j] + (1.0 - rho) * rng.normal();
      }
      for (std::uint32_t j : top_n(mixed, uniform_count(rng, spec.auxiliary_min, spec.auxiliary_max))) {
        events.emplace_back(j, b);
      }
    }
    rng.shuffle(events.begin(), events.end());
    std::int64_t t = spec.start_time + static_cast<std::int64_t>(rng.below(26 * kSecondsPerWeek));
    for (const auto& [item, behavior] : events) {
      t += 3600 + static_cast<std::int64_t>(rng.below(4 * 86400));
      log.records.push_back({u, item, behavior, t});
    }
  }
  return corpus;
}

}  // namespace khgt::data
