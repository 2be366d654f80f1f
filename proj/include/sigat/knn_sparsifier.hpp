#pragma once

// Top-k neighborhood selection over rows of the correlation matrix.
//
// N_i is node i itself followed by the k strongest entries of row i (ties go
// to the lower index). The kept edges are re-weighted with scales measured
// over the selected neighbors only, and a 0/1 mask marks the same support.
// No symmetrization is applied: the graph is directed.

#include <cstddef>
#include <span>
#include <vector>

#include "sigat/dense.hpp"
#include "sigat/graph_builder.hpp"

namespace sigat {

inline constexpr std::size_t kDefaultK = 8;

using NeighborLists = std::vector<std::vector<std::size_t>>;

// Compressed sparse rows. Row i's entries are stored in N_i order.
struct CsrMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> offsets;  // n + 1
  std::vector<std::size_t> columns;
  std::vector<double> values;

  std::size_t nnz() const { return columns.size(); }
  double at(std::size_t i, std::size_t j) const;
  DenseMatrix to_dense() const;
  bool operator==(const CsrMatrix&) const = default;
};

struct SparseGraph {
  std::size_t n = 0;
  std::size_t k = 0;
  double gamma = 0.5;
  NeighborLists neighbor_lists;
  CsrMatrix weights_prime;
  CsrMatrix binary_mask;

  // A carries the re-weighted values on the kept support, i.e. A == W'.
  const CsrMatrix& adjacency() const { return weights_prime; }

  // Throws kContract naming the first offending node.
  void validate() const;
  bool operator==(const SparseGraph&) const = default;
};

std::vector<std::size_t> rank_edges(std::span<const double> row, std::size_t self_index);

NeighborLists select_neighbors(const CorrelationMatrix& w, std::size_t k);
NeighborLists select_neighbors_serial(const CorrelationMatrix& w, std::size_t k);

CsrMatrix reweight(const NodeSet& nodes, const NeighborLists& lists, double gamma);
CsrMatrix reweight_serial(const NodeSet& nodes, const NeighborLists& lists, double gamma);

CsrMatrix binary_mask(const NeighborLists& lists);

// Full pipeline: W -> N_i -> W' and mask.
SparseGraph sparsify(const NodeSet& nodes, double gamma, std::size_t k);

}  // namespace sigat
