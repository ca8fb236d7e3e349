#pragma once

// Scalar-loop reference implementation of the forward pass, written
// independently of the tape kernels. Used as an oracle by the tests.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "khgt/data/graph.hpp"
#include "khgt/model/params.hpp"

namespace oracle {

using Vec = std::vector<double>;
using khgt::model::ModelParams;

inline constexpr double kSlope = 0.01;

inline Vec matvec(const double* w, std::size_t rows, std::size_t cols, const Vec& x) {
  Vec y(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y[r] += w[r * cols + c] * x[c];
  return y;
}

inline Vec softmax(const Vec& v) {
  double m = v[0];
  for (double x : v) m = std::max(m, x);
  Vec e(v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += (e[i] = std::exp(v[i] - m));
  for (double& x : e) x /= s;
  return e;
}

inline Vec add(Vec a, const Vec& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  return a;
}

inline Vec leaky(Vec a) {
  for (double& x : a) x = x >= 0 ? x : kSlope * x;
  return a;
}

inline Vec sinusoid(std::uint64_t slot, std::size_t d) {
  Vec t(2 * d);
  for (std::size_t l = 0; l < d; ++l) {
    t[2 * l] = std::sin(double(slot) / std::pow(10000.0, double(2 * l) / double(d)));
    t[2 * l + 1] = std::cos(double(slot) / std::pow(10000.0, double(2 * l + 1) / double(d)));
  }
  return t;
}

/// T(slot) W_k as a row-vector product.
inline Vec temporal(const ModelParams& p, std::size_t k, std::uint64_t slot) {
  const std::size_t d = p.hyper.dim;
  const Vec t = sinusoid(slot, d);
  const auto w = p.at("time_projection").data();
  Vec out(d, 0.0);
  for (std::size_t r = 0; r < 2 * d; ++r)
    for (std::size_t c = 0; c < d; ++c) out[c] += t[r] * w[k * 2 * d * d + r * d + c];
  return out;
}

struct Transforms {
  Vec q, k, v;  // d x d, row-major
};

inline Vec mix(const ModelParams& p, const std::string& prefix, const char* role, std::size_t type, bool gated) {
  const std::size_t d = p.hyper.dim, M = p.hyper.channels;
  const auto base = p.at(prefix + "." + role + "_base").data();
  const auto logits = p.at(prefix + "." + role + "_gate").data();
  Vec gate(M, 0.0);
  if (gated) {
    gate = softmax(Vec(logits.begin() + type * M, logits.begin() + (type + 1) * M));
  } else {
    gate[0] = 1.0;
  }
  Vec w(d * d, 0.0);
  for (std::size_t m = 0; m < M; ++m)
    for (std::size_t i = 0; i < d * d; ++i) w[i] += gate[m] * base[m * d * d + i];
  return w;
}

inline Transforms transforms(const ModelParams& p, const std::string& prefix, std::size_t type, bool gated = true) {
  return {mix(p, prefix, "query", type, gated), mix(p, prefix, "key", type, gated), mix(p, prefix, "value", type, gated)};
}

/// One target node: per-edge query inputs, key/value inputs. Returns the
/// activated aggregate (zero without edges) and the per-head weights.
struct NodeAttention {
  Vec aggregate;
  std::vector<Vec> weights;  // [edge][head]
};

inline NodeAttention attend(const Transforms& t, const std::vector<Vec>& query_in, const std::vector<Vec>& source_in,
                            std::size_t d, std::size_t heads) {
  NodeAttention out{Vec(d, 0.0), {}};
  const std::size_t n = source_in.size();
  if (n == 0) return out;
  const std::size_t dh = d / heads;
  std::vector<Vec> qs, ks, vs;
  for (std::size_t e = 0; e < n; ++e) {
    qs.push_back(matvec(t.q.data(), d, d, query_in[e]));
    ks.push_back(matvec(t.k.data(), d, d, source_in[e]));
    vs.push_back(matvec(t.v.data(), d, d, source_in[e]));
  }
  out.weights.assign(n, Vec(heads));
  Vec sum(d, 0.0);
  for (std::size_t h = 0; h < heads; ++h) {
    Vec logits(n, 0.0);
    for (std::size_t e = 0; e < n; ++e) {
      for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) logits[e] += qs[e][c] * ks[e][c];
      logits[e] /= std::sqrt(double(dh));
    }
    const Vec w = softmax(logits);
    for (std::size_t e = 0; e < n; ++e) {
      out.weights[e][h] = w[e];
      for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) sum[c] += w[e] * vs[e][c];
    }
  }
  out.aggregate = leaky(sum);
  return out;
}

/// Type-level attention over one node's stacked type vectors.
inline std::vector<Vec> mutual(const ModelParams& p, const std::string& side, const std::vector<Vec>& types,
                               std::vector<std::vector<Vec>>* lambda = nullptr) {
  const std::size_t d = p.hyper.dim, H = p.hyper.heads, dh = d / H, T = types.size();
  const auto Q = p.at(side + ".query").data(), K = p.at(side + ".key").data(), V = p.at(side + ".value").data();
  std::vector<Vec> q, k, v;
  for (const Vec& x : types) {
    q.push_back(matvec(Q.data(), d, d, x));
    k.push_back(matvec(K.data(), d, d, x));
    v.push_back(matvec(V.data(), d, d, x));
  }
  std::vector<Vec> out(T, Vec(d, 0.0));
  if (lambda) lambda->assign(T, std::vector<Vec>(T, Vec(H)));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t h = 0; h < H; ++h) {
      Vec logits(T, 0.0);
      for (std::size_t t2 = 0; t2 < T; ++t2) {
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) logits[t2] += q[t][c] * k[t2][c];
        logits[t2] /= std::sqrt(double(dh));
      }
      const Vec w = softmax(logits);
      for (std::size_t t2 = 0; t2 < T; ++t2) {
        if (lambda) (*lambda)[t][t2][h] = w[t2];
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) out[t][c] += w[t2] * v[t2][c];
      }
    }
  return out;
}

/// Softmax-gated sum of one node's type vectors.
inline Vec fuse(const ModelParams& p, const std::string& side, const char* weight, const std::vector<Vec>& types,
                Vec* gates = nullptr) {
  const std::size_t d = p.hyper.dim;
  const std::string prefix = "fusion." + side;
  const auto B1 = p.at(prefix + ".B1").data(), B2 = p.at(prefix + ".B2").data();
  const auto c1 = p.at(prefix + ".c1").data(), w = p.at(weight).data();
  const double c0 = p.at(prefix + ".c0")[0];
  Vec total(d, 0.0);
  for (const Vec& x : types) total = add(total, x);
  const Vec context = matvec(B2.data(), d, d, total);
  Vec logits;
  for (const Vec& x : types) {
    const Vec f = add(add(matvec(B1.data(), d, d, x), context), Vec(c1.begin(), c1.end()));
    double s = c0;
    for (std::size_t i = 0; i < d; ++i) s += w[i] * f[i];
    logits.push_back(s);
  }
  const Vec eta = softmax(logits);
  if (gates) *gates = eta;
  Vec out(d, 0.0);
  for (std::size_t t = 0; t < types.size(); ++t)
    for (std::size_t i = 0; i < d; ++i) out[i] += eta[t] * types[t][i];
  return out;
}

struct Embeddings {
  std::vector<Vec> users, items;
};

/// One propagation layer of the full model on global ids.
inline Embeddings layer(const ModelParams& p, const khgt::data::MultiBehaviorGraph& ui,
                        const khgt::data::ItemRelationGraph& ii, const Embeddings& x, bool use_relations = true) {
  const std::size_t d = p.hyper.dim, H = p.hyper.heads, K = ui.num_behaviors;
  const std::size_t R = use_relations ? ii.num_relations() : 0;
  std::vector<std::vector<Vec>> user_types(ui.num_users), item_types(ui.num_items);
  for (std::size_t k = 0; k < K; ++k) {
    const Transforms t = transforms(p, "interaction", k);
    for (std::uint32_t u = 0; u < ui.num_users; ++u) {
      std::vector<Vec> qin, src;
      const auto nb = ui.by_user[k].neighbors_of(u);
      const auto sl = ui.by_user[k].slots_of(u);
      for (std::size_t e = 0; e < nb.size(); ++e) {
        const Vec tau = temporal(p, k, sl[e]);
        qin.push_back(add(x.users[u], tau));
        src.push_back(add(x.items[nb[e]], tau));
      }
      user_types[u].push_back(attend(t, qin, src, d, H).aggregate);
    }
    for (std::uint32_t j = 0; j < ui.num_items; ++j) {
      std::vector<Vec> qin, src;
      const auto nb = ui.by_item[k].neighbors_of(j);
      const auto sl = ui.by_item[k].slots_of(j);
      for (std::size_t e = 0; e < nb.size(); ++e) {
        const Vec tau = temporal(p, k, sl[e]);
        qin.push_back(add(x.items[j], tau));
        src.push_back(add(x.users[nb[e]], tau));
      }
      item_types[j].push_back(attend(t, qin, src, d, H).aggregate);
    }
  }
  for (std::size_t r = 0; r < R; ++r) {
    const Transforms t = transforms(p, "relation", r);
    for (std::uint32_t j = 0; j < ui.num_items; ++j) {
      std::vector<Vec> qin, src;
      for (auto n : ii.relations[r].neighbors_of(j)) {
        qin.push_back(x.items[j]);
        src.push_back(x.items[n]);
      }
      item_types[j].push_back(attend(t, qin, src, d, H).aggregate);
    }
  }
  Embeddings out;
  for (auto& types : user_types) out.users.push_back(fuse(p, "behavior", "fusion.a0", mutual(p, "user_mutual", types)));
  for (auto& types : item_types) {
    const std::vector<Vec> mixed = mutual(p, "item_mutual", types);
    Vec phi = fuse(p, "behavior", "fusion.a0", std::vector<Vec>(mixed.begin(), mixed.begin() + K));
    if (R > 0) phi = add(phi, fuse(p, "relation", "fusion.b0", std::vector<Vec>(mixed.begin() + K, mixed.end())));
    out.items.push_back(phi);
  }
  return out;
}

inline Embeddings encode(const ModelParams& p, const khgt::data::MultiBehaviorGraph& ui,
                         const khgt::data::ItemRelationGraph& ii, bool use_relations = true) {
  const std::size_t d = p.hyper.dim;
  Embeddings x;
  const auto eu = p.at("user_embedding").data(), ei = p.at("item_embedding").data();
  for (std::size_t u = 0; u < ui.num_users; ++u) x.users.emplace_back(eu.begin() + u * d, eu.begin() + (u + 1) * d);
  for (std::size_t j = 0; j < ui.num_items; ++j) x.items.emplace_back(ei.begin() + j * d, ei.begin() + (j + 1) * d);
  Embeddings total;
  for (std::uint32_t l = 0; l < p.hyper.layers; ++l) {
    x = layer(p, ui, ii, x, use_relations);
    if (l == 0) {
      total = x;
    } else {
      for (std::size_t u = 0; u < x.users.size(); ++u) total.users[u] = add(total.users[u], x.users[u]);
      for (std::size_t j = 0; j < x.items.size(); ++j) total.items[j] = add(total.items[j], x.items[j]);
    }
  }
  return total;
}

inline double score(const Vec& user, const Vec& item, std::span<const double> z) {
  double s = 0.0;
  for (std::size_t i = 0; i < user.size(); ++i) s += z[i] * user[i] * item[i];
  return s;
}

}  // namespace oracle
