#pragma once

// Independent brute-force references used by the unit and acceptance tests.
// Nothing here calls into the code under test beyond plain data types.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "sigat/autodiff.hpp"
#include "sigat/gat_layer.hpp"
#include "sigat/graph_builder.hpp"
#include "sigat/knn_sparsifier.hpp"
#include "sigat/rng.hpp"

namespace oracle {

using Dense = std::vector<std::vector<double>>;

inline sigat::NodeSet random_nodes(sigat::SplitMix64& rng, std::size_t n, bool coarse = false) {
  sigat::NodeSet set;
  set.source_width = 100;
  set.source_height = 100;
  for (std::size_t i = 0; i < n; ++i) {
    sigat::Node node;
    node.id = i;
    // Coarse mode draws from a handful of levels so equal intensities and
    // repeated distances show up.
    const auto draw = [&] { return coarse ? static_cast<double>(rng.below(5)) / 4.0 : rng.uniform(); };
    node.centroid = {draw(), draw()};
    node.mean_intensity = draw();
    node.features = {node.mean_intensity, 0.1 * rng.uniform(), node.centroid.x, node.centroid.y};
    set.nodes.push_back(node);
  }
  return set;
}

inline double distance(const sigat::Node& a, const sigat::Node& b) {
  const double dx = a.centroid.x - b.centroid.x;
  const double dy = a.centroid.y - b.centroid.y;
  return std::sqrt(dx * dx + dy * dy);
}

// Mean spatial and intensity distance from i to the nodes in `others`
// (excluding i itself), floored at 1e-9.
inline std::pair<double, double> scales(const sigat::NodeSet& set, std::size_t i,
                                        const std::vector<std::size_t>& others) {
  double sx = 0.0, sf = 0.0;
  std::size_t m = 0;
  for (std::size_t j : others) {
    if (j == i) continue;
    sx += distance(set.nodes[i], set.nodes[j]);
    sf += std::fabs(set.nodes[i].mean_intensity - set.nodes[j].mean_intensity);
    ++m;
  }
  double dx = m ? sx / static_cast<double>(m) : 0.0;
  double df = m ? sf / static_cast<double>(m) : 0.0;
  if (dx <= 0.0) dx = 1e-9;
  if (df <= 0.0) df = 1e-9;
  return {dx, df};
}

inline double mixed_weight(const sigat::Node& a, const sigat::Node& b, double dx, double df, double gamma) {
  const double d = distance(a, b);
  const double spatial = std::exp(-(d * d) / (dx * dx));
  const double ratio = std::fabs(a.mean_intensity - b.mean_intensity) / (df * df);
  const double pixel = 1.0 / (1.0 + std::exp(-(ratio * ratio)));
  return gamma * spatial + (1.0 - gamma) * pixel;
}

inline Dense correlation(const sigat::NodeSet& set, double gamma) {
  const std::size_t n = set.size();
  std::vector<std::size_t> all(n);
  for (std::size_t j = 0; j < n; ++j) all[j] = j;
  Dense w(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto [dx, df] = scales(set, i, all);
    for (std::size_t j = 0; j < n; ++j) w[i][j] = mixed_weight(set.nodes[i], set.nodes[j], dx, df, gamma);
  }
  return w;
}

inline Dense reweighted(const sigat::NodeSet& set, const sigat::NeighborLists& lists, double gamma) {
  const std::size_t n = set.size();
  Dense w(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const auto [dx, df] = scales(set, i, lists[i]);
    for (std::size_t j : lists[i]) w[i][j] = mixed_weight(set.nodes[i], set.nodes[j], dx, df, gamma);
  }
  return w;
}

inline Dense mask(const sigat::NeighborLists& lists) {
  Dense m(lists.size(), std::vector<double>(lists.size(), 0.0));
  for (std::size_t i = 0; i < lists.size(); ++i) {
    for (std::size_t j : lists[i]) m[i][j] = 1.0;
  }
  return m;
}

// j beats l when it is larger, or equal with a smaller index.
inline bool beats(const std::vector<double>& row, std::size_t j, std::size_t l) {
  return row[j] > row[l] || (row[j] == row[l] && j < l);
}

// Top-k by pairwise counting: j is kept iff fewer than k other candidates
// beat it. Returned in rank order.
inline std::vector<std::size_t> top_k_by_rank(const std::vector<double>& row, std::size_t self, std::size_t k) {
  std::vector<std::pair<std::size_t, std::size_t>> ranked;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (j == self) continue;
    std::size_t rank = 0;
    for (std::size_t l = 0; l < row.size(); ++l) {
      if (l != self && l != j && beats(row, l, j)) ++rank;
    }
    if (rank < k) ranked.emplace_back(rank, j);
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::size_t> out;
  for (auto& r : ranked) out.push_back(r.second);
  return out;
}

// Top-k by enumerating every k-subset of the candidates. The winner has the
// best multiset of values; among equal multisets, the smallest indices.
inline std::vector<std::size_t> top_k_exhaustive(const std::vector<double>& row, std::size_t self, std::size_t k) {
  std::vector<std::size_t> cand;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (j != self) cand.push_back(j);
  }
  std::vector<bool> pick(cand.size(), false);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(k), true);
  std::vector<std::size_t> best;
  std::vector<double> best_vals;
  do {
    std::vector<std::size_t> s;
    for (std::size_t t = 0; t < cand.size(); ++t) {
      if (pick[t]) s.push_back(cand[t]);
    }
    std::vector<double> vals;
    for (auto j : s) vals.push_back(row[j]);
    std::sort(vals.rbegin(), vals.rend());
    bool better = best.empty();
    if (!better) {
      if (vals != best_vals) {
        better = std::lexicographical_compare(best_vals.begin(), best_vals.end(), vals.begin(), vals.end());
      } else {
        better = s < best;
      }
    }
    if (better) {
      best = s;
      best_vals = vals;
    }
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

// Row-wise softmax over a dense logit matrix with an additive -1e30 mask.
inline Dense dense_mask_softmax(const Dense& logits, const Dense& m) {
  Dense out = logits;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    std::vector<double> masked(logits[i].size());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < masked.size(); ++j) {
      masked[j] = logits[i][j] + (m[i][j] > 0.0 ? 0.0 : -1e30);
      top = std::max(top, masked[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < masked.size(); ++j) z += std::exp(masked[j] - top);
    for (std::size_t j = 0; j < masked.size(); ++j) out[i][j] = std::exp(masked[j] - top) / z;
  }
  return out;
}

inline double leaky(double x, double slope) { return x >= 0.0 ? x : slope * x; }

inline double apply(sigat::Activation act, double x) {
  switch (act) {
    case sigat::Activation::kElu: return x > 0.0 ? x : std::expm1(x);
    case sigat::Activation::kRelu: return x > 0.0 ? x : 0.0;
    case sigat::Activation::kIdentity: return x;
  }
  return x;
}

// z = h Q^T (M x F').
inline Dense transform(const Dense& h, const sigat::ad::Tensor& q) {
  const std::size_t fo = q.rows(), fi = q.cols();
  Dense z(h.size(), std::vector<double>(fo, 0.0));
  for (std::size_t i = 0; i < h.size(); ++i) {
    for (std::size_t o = 0; o < fo; ++o) {
      for (std::size_t f = 0; f < fi; ++f) z[i][o] += q(o, f) * h[i][f];
    }
  }
  return z;
}

// Dense logits e_ij = LeakyReLU(a^T [z_i || z_j]) for every pair.
inline Dense pair_logits(const Dense& z, const sigat::ad::Tensor& a, double slope) {
  const std::size_t m = z.size(), fo = z.empty() ? 0 : z[0].size();
  Dense e(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = 0.0;
      for (std::size_t o = 0; o < fo; ++o) s += a.values[o] * z[i][o] + a.values[fo + o] * z[j][o];
      e[i][j] = leaky(s, slope);
    }
  }
  return e;
}

// Dense coefficients of one head, via the dense-mask softmax.
inline Dense head_alpha(const Dense& h, const sigat::AttentionHead& head, const sigat::NeighborLists& lists,
                        double slope) {
  return dense_mask_softmax(pair_logits(transform(h, head.q), head.a, slope), mask(lists));
}

// sum_j alpha_ij z_j, before the activation.
inline Dense head_pre_activation(const Dense& h, const sigat::AttentionHead& head,
                                 const sigat::NeighborLists& lists, double slope) {
  const Dense z = transform(h, head.q);
  const Dense alpha = head_alpha(h, head, lists, slope);
  Dense out(h.size(), std::vector<double>(z.empty() ? 0 : z[0].size(), 0.0));
  for (std::size_t i = 0; i < h.size(); ++i) {
    for (std::size_t j = 0; j < h.size(); ++j) {
      for (std::size_t o = 0; o < out[i].size(); ++o) out[i][o] += alpha[i][j] * z[j][o];
    }
  }
  return out;
}

inline Dense layer(const Dense& h, const std::vector<sigat::AttentionHead>& heads, const sigat::LayerConfig& cfg,
                   const sigat::NeighborLists& lists) {
  const std::size_t m = h.size();
  Dense out(m);
  if (cfg.combine == sigat::HeadCombine::kConcat) {
    for (const auto& head : heads) {
      const Dense p = head_pre_activation(h, head, lists, cfg.leaky_slope);
      for (std::size_t i = 0; i < m; ++i) {
        for (double v : p[i]) out[i].push_back(apply(cfg.activation, v));
      }
    }
  } else {
    Dense acc(m, std::vector<double>(cfg.out_dim, 0.0));
    for (const auto& head : heads) {
      const Dense p = head_pre_activation(h, head, lists, cfg.leaky_slope);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t o = 0; o < cfg.out_dim; ++o) acc[i][o] += p[i][o];
      }
    }
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t o = 0; o < cfg.out_dim; ++o) {
        out[i].push_back(apply(cfg.activation, acc[i][o] / static_cast<double>(heads.size())));
      }
    }
  }
  return out;
}

inline Dense to_dense(const sigat::ad::Tensor& t) {
  Dense d(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) d[r][c] = t(r, c);
  }
  return d;
}

inline sigat::ad::Tensor to_tensor(const Dense& d) {
  std::vector<double> flat;
  for (const auto& row : d) flat.insert(flat.end(), row.begin(), row.end());
  return sigat::ad::Tensor::matrix(d.size(), d.empty() ? 0 : d[0].size(), flat);
}

inline double max_abs_diff(const Dense& a, const Dense& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].size(); ++j) worst = std::max(worst, std::fabs(a[i][j] - b[i][j]));
  }
  return worst;
}

inline sigat::NeighborLists random_lists(sigat::SplitMix64& rng, std::size_t n, std::size_t k) {
  sigat::NeighborLists lists(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) others.push_back(j);
    }
    for (std::size_t t = 0; t < others.size(); ++t) {
      std::swap(others[t], others[t + rng.below(others.size() - t)]);
    }
    lists[i].push_back(i);
    lists[i].insert(lists[i].end(), others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return lists;
}

inline sigat::ad::Tensor random_tensor(sigat::SplitMix64& rng, std::size_t rows, std::size_t cols,
                                       double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return sigat::ad::Tensor::matrix(rows, cols, v);
}

// Central difference of a scalar function of flat parameters.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double eps) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + eps;
    const double up = f(x);
    x[i] = keep - eps;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

inline double relative_error(double a, double b) {
  return std::fabs(a - b) / std::max(1e-8, std::fabs(a) + std::fabs(b));
}

}  // namespace oracle
