#pragma once

// Graph attention layer with KNN-masked coefficients.
//
// For one head with transform Q (F' x F) and attention vector a (2F'):
//   z_j     = Q h_j
//   e_ij    = LeakyReLU(a^T [z_i || z_j])             for j in N_i
//   alpha_i = softmax of e_i. restricted to N_i        (zero elsewhere)
//   h'_i    = sigma(sum_{j in N_i} alpha_ij z_j)
// Heads are concatenated (sigma per head) or averaged (sigma after the mean).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sigat/autodiff.hpp"
#include "sigat/knn_sparsifier.hpp"

namespace sigat {

enum class HeadCombine { kConcat, kAverage };
enum class Activation { kElu, kRelu, kIdentity };

inline constexpr double kLeakySlope = 0.2;

struct LayerConfig {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;  // per head
  std::size_t heads = 1;
  HeadCombine combine = HeadCombine::kConcat;
  double leaky_slope = kLeakySlope;
  Activation activation = Activation::kElu;

  std::size_t output_dim() const { return combine == HeadCombine::kConcat ? heads * out_dim : out_dim; }
  std::size_t parameter_count() const { return heads * (out_dim * in_dim + 2 * out_dim); }
  void validate() const;
  bool operator==(const LayerConfig&) const = default;
};

std::string to_string(HeadCombine combine);
std::string to_string(Activation activation);
HeadCombine parse_head_combine(const std::string& text);
Activation parse_activation(const std::string& text);

struct AttentionHead {
  ad::Tensor q;  // F' x F
  ad::Tensor a;  // 2F' x 1
  bool operator==(const AttentionHead&) const = default;
};

// Seeded uniform init: Q in +-sqrt(6/(F+F')), a in +-sqrt(6/(2F'+1)).
AttentionHead init_head(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed);

// Edge list in CSR order: edges [offsets[i], offsets[i+1]) belong to node i,
// with targets listed in N_i order (self first).
struct AttentionGraph {
  std::size_t n = 0;
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> sources;
  std::vector<std::size_t> targets;

  std::size_t edge_count() const { return targets.size(); }
};

AttentionGraph attention_graph(const NeighborLists& lists);
inline AttentionGraph attention_graph(const SparseGraph& graph) {
  return attention_graph(graph.neighbor_lists);
}

namespace gat {

struct HeadVars {
  ad::Var q;
  ad::Var a;
};

// h * Q^T, i.e. row j is Q h_j.
ad::Var transform(ad::Tape& tape, ad::Var h, ad::Var q);

// One logit per edge (E x 1), computed only on the kept support.
ad::Var attention_logits(ad::Tape& tape, ad::Var z, ad::Var a, const AttentionGraph& graph,
                         double slope = kLeakySlope);

// Softmax of each node's edge logits over N_i.
ad::Var masked_attention(ad::Tape& tape, ad::Var logits, const AttentionGraph& graph);

// sum_{j in N_i} alpha_ij z_j, before the nonlinearity.
ad::Var aggregate_linear(ad::Tape& tape, ad::Var alpha, ad::Var z, const AttentionGraph& graph);

ad::Var activate(ad::Tape& tape, ad::Var x, Activation activation);

// sigma(aggregate_linear(...)).
ad::Var aggregate(ad::Tape& tape, ad::Var alpha, ad::Var z, const AttentionGraph& graph,
                  Activation activation);

ad::Var multi_head(ad::Tape& tape, ad::Var h, std::span<const HeadVars> heads,
                   const LayerConfig& config, const AttentionGraph& graph);

// Dense M x M view of one head's coefficients (zeros off N_i).
std::vector<double> dense_coefficients(const ad::Tensor& alpha, const AttentionGraph& graph);

}  // namespace gat
}  // namespace sigat
