#include "sigat/knn_sparsifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sigat/error.hpp"

namespace sigat {

double CsrMatrix::at(std::size_t i, std::size_t j) const {
  for (std::size_t e = offsets[i]; e < offsets[i + 1]; ++e) {
    if (columns[e] == j) return values[e];
  }
  return 0.0;
}

DenseMatrix CsrMatrix::to_dense() const {
  DenseMatrix dense(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t e = offsets[i]; e < offsets[i + 1]; ++e) dense(i, columns[e]) = values[e];
  }
  return dense;
}

void SparseGraph::validate() const {
  if (neighbor_lists.size() != n) {
    fail(ErrorCode::kContract, "graph has " + std::to_string(neighbor_lists.size()) +
                                   " neighbor lists for " + std::to_string(n) + " nodes");
  }
  const std::size_t expected = std::min(k, n > 0 ? n - 1 : 0) + 1;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& list = neighbor_lists[i];
    if (list.empty()) fail(ErrorCode::kContract, "node " + std::to_string(i) + " has an empty neighborhood");
    if (list.front() != i) {
      fail(ErrorCode::kContract, "node " + std::to_string(i) + " neighborhood does not start with itself");
    }
    if (list.size() != expected) {
      fail(ErrorCode::kContract, "node " + std::to_string(i) + " has " + std::to_string(list.size()) +
                                     " neighbors, expected " + std::to_string(expected));
    }
    std::vector<char> seen(n, 0);
    for (std::size_t j : list) {
      if (j >= n || seen[j]) {
        fail(ErrorCode::kContract, "node " + std::to_string(i) + " has an invalid or repeated neighbor");
      }
      seen[j] = 1;
    }
  }
  auto check_pattern = [&](const CsrMatrix& m, const char* name) {
    if (m.n != n || m.offsets.size() != n + 1) {
      fail(ErrorCode::kContract, std::string(name) + " has the wrong dimension");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& list = neighbor_lists[i];
      if (m.offsets[i + 1] - m.offsets[i] != list.size() ||
          !std::equal(list.begin(), list.end(), m.columns.begin() + static_cast<std::ptrdiff_t>(m.offsets[i]))) {
        fail(ErrorCode::kContract,
             std::string(name) + " row " + std::to_string(i) + " disagrees with the neighbor list");
      }
    }
  };
  check_pattern(weights_prime, "W'");
  check_pattern(binary_mask, "mask");
}

std::vector<std::size_t> rank_edges(std::span<const double> row, std::size_t self_index) {
  std::vector<std::size_t> order;
  order.reserve(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (j != self_index) order.push_back(j);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
  return order;
}

namespace {

void check_k(std::size_t n, std::size_t k) {
  if (n < 2 || k < 1 || k > n - 1) {
    fail(ErrorCode::kInvalidConfig, "k must satisfy 1 <= k <= n-1 (k=" + std::to_string(k) +
                                        ", n=" + std::to_string(n) + ")");
  }
}

std::vector<std::size_t> neighbors_of(const CorrelationMatrix& w, std::size_t i, std::size_t k) {
  std::vector<std::size_t> ranked = rank_edges(w.weights.row(i), i);
  std::vector<std::size_t> list;
  list.reserve(k + 1);
  list.push_back(i);
  list.insert(list.end(), ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k));
  return list;
}

CsrMatrix pattern_of(const NeighborLists& lists) {
  CsrMatrix m;
  m.n = lists.size();
  m.offsets.assign(m.n + 1, 0);
  for (std::size_t i = 0; i < m.n; ++i) m.offsets[i + 1] = m.offsets[i] + lists[i].size();
  m.columns.reserve(m.offsets.back());
  for (const auto& list : lists) m.columns.insert(m.columns.end(), list.begin(), list.end());
  m.values.assign(m.columns.size(), 0.0);
  return m;
}

void reweight_row(const NodeSet& nodes, const NeighborLists& lists, double gamma, CsrMatrix& m,
                  std::size_t i) {
  const auto& list = lists[i];
  const Node& ni = nodes.nodes[i];
  double sum_x = 0.0;
  double sum_f = 0.0;
  std::size_t count = 0;
  for (std::size_t j : list) {
    if (j == i) continue;
    const Node& nj = nodes.nodes[j];
    sum_x += std::hypot(ni.centroid.x - nj.centroid.x, ni.centroid.y - nj.centroid.y);
    sum_f += std::abs(ni.mean_intensity - nj.mean_intensity);
    ++count;
  }
  double dx = count > 0 ? sum_x / static_cast<double>(count) : 0.0;
  double df = count > 0 ? sum_f / static_cast<double>(count) : 0.0;
  if (!(dx > 0.0)) dx = kScaleFloor;
  if (!(df > 0.0)) df = kScaleFloor;
  for (std::size_t e = m.offsets[i]; e < m.offsets[i + 1]; ++e) {
    const std::size_t j = m.columns[e];
    m.values[e] = j == i ? gamma + (1.0 - gamma) * 0.5
                         : edge_weight(ni, nodes.nodes[j], dx, df, gamma);
  }
}

void check_lists(const NodeSet& nodes, const NeighborLists& lists) {
  if (lists.size() != nodes.size()) {
    fail(ErrorCode::kShape, "neighbor lists do not match the node count");
  }
  for (std::size_t i = 0; i < lists.size(); ++i) {
    if (lists[i].empty()) fail(ErrorCode::kContract, "node " + std::to_string(i) + " has an empty neighborhood");
    for (std::size_t j : lists[i]) {
      if (j >= nodes.size()) fail(ErrorCode::kContract, "node " + std::to_string(i) + " has an out-of-range neighbor");
    }
  }
}

}  // namespace

NeighborLists select_neighbors(const CorrelationMatrix& w, std::size_t k) {
  check_k(w.n, k);
  NeighborLists lists(w.n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(w.n); ++i) {
    lists[static_cast<std::size_t>(i)] = neighbors_of(w, static_cast<std::size_t>(i), k);
  }
  return lists;
}

NeighborLists select_neighbors_serial(const CorrelationMatrix& w, std::size_t k) {
  check_k(w.n, k);
  NeighborLists lists(w.n);
  for (std::size_t i = 0; i < w.n; ++i) lists[i] = neighbors_of(w, i, k);
  return lists;
}

CsrMatrix reweight(const NodeSet& nodes, const NeighborLists& lists, double gamma) {
  check_lists(nodes, lists);
  CsrMatrix m = pattern_of(lists);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m.n); ++i) {
    reweight_row(nodes, lists, gamma, m, static_cast<std::size_t>(i));
  }
  return m;
}

CsrMatrix reweight_serial(const NodeSet& nodes, const NeighborLists& lists, double gamma) {
  check_lists(nodes, lists);
  CsrMatrix m = pattern_of(lists);
  for (std::size_t i = 0; i < m.n; ++i) reweight_row(nodes, lists, gamma, m, i);
  return m;
}

CsrMatrix binary_mask(const NeighborLists& lists) {
  CsrMatrix m = pattern_of(lists);
  std::fill(m.values.begin(), m.values.end(), 1.0);
  return m;
}

SparseGraph sparsify(const NodeSet& nodes, double gamma, std::size_t k) {
  const CorrelationMatrix w = correlation_matrix(nodes, gamma);
  SparseGraph g;
  g.n = w.n;
  g.k = k;
  g.gamma = gamma;
  g.neighbor_lists = select_neighbors(w, k);
  g.weights_prime = reweight(nodes, g.neighbor_lists, gamma);
  g.binary_mask = binary_mask(g.neighbor_lists);
  return g;
}

}  // namespace sigat
