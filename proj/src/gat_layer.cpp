#include "sigat/gat_layer.hpp"

#include <cmath>

#include "sigat/error.hpp"
#include "sigat/rng.hpp"

namespace sigat {

void LayerConfig::validate() const {
  if (in_dim < 1 || out_dim < 1 || heads < 1) {
    fail(ErrorCode::kInvalidConfig, "layer dims and head count must be positive");
  }
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) {
    fail(ErrorCode::kInvalidConfig, "leaky slope must lie in [0,1)");
  }
}

std::string to_string(HeadCombine combine) {
  return combine == HeadCombine::kConcat ? "concat" : "average";
}

std::string to_string(Activation activation) {
  switch (activation) {
    case Activation::kElu: return "elu";
    case Activation::kRelu: return "relu";
    case Activation::kIdentity: return "identity";
  }
  return "identity";
}

HeadCombine parse_head_combine(const std::string& text) {
  if (text == "concat") return HeadCombine::kConcat;
  if (text == "average") return HeadCombine::kAverage;
  fail(ErrorCode::kParse, "unknown head combination '" + text + "'");
}

Activation parse_activation(const std::string& text) {
  if (text == "elu") return Activation::kElu;
  if (text == "relu") return Activation::kRelu;
  if (text == "identity") return Activation::kIdentity;
  fail(ErrorCode::kParse, "unknown activation '" + text + "'");
}

AttentionHead init_head(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed) {
  SplitMix64 rng(seed);
  AttentionHead head{ad::Tensor({out_dim, in_dim}), ad::Tensor({2 * out_dim, 1})};
  const double sq = std::sqrt(6.0 / static_cast<double>(in_dim + out_dim));
  for (double& v : head.q.values) v = rng.uniform(-sq, sq);
  const double sa = std::sqrt(6.0 / static_cast<double>(2 * out_dim + 1));
  for (double& v : head.a.values) v = rng.uniform(-sa, sa);
  return head;
}

AttentionGraph attention_graph(const NeighborLists& lists) {
  AttentionGraph g;
  g.n = lists.size();
  g.offsets.assign(g.n + 1, 0);
  for (std::size_t i = 0; i < g.n; ++i) {
    if (lists[i].empty()) fail(ErrorCode::kContract, "node " + std::to_string(i) + " has an empty neighborhood");
    g.offsets[i + 1] = g.offsets[i] + lists[i].size();
    for (std::size_t j : lists[i]) {
      if (j >= g.n) fail(ErrorCode::kContract, "node " + std::to_string(i) + " has an out-of-range neighbor");
      g.sources.push_back(i);
      g.targets.push_back(j);
    }
  }
  return g;
}

namespace gat {

ad::Var transform(ad::Tape& tape, ad::Var h, ad::Var q) { return tape.matmul(h, q, true); }

ad::Var attention_logits(ad::Tape& tape, ad::Var z, ad::Var a, const AttentionGraph& graph,
                         double slope) {
  if (tape.value(z).rows() != graph.n) {
    fail(ErrorCode::kShape, "attention_logits: feature rows do not match node count");
  }
  return tape.leaky_relu(tape.edge_pair_logits(z, a, graph.sources, graph.targets), slope);
}

ad::Var masked_attention(ad::Tape& tape, ad::Var logits, const AttentionGraph& graph) {
  return tape.segment_softmax(logits, graph.offsets);
}

ad::Var aggregate_linear(ad::Tape& tape, ad::Var alpha, ad::Var z, const AttentionGraph& graph) {
  return tape.neighbor_weighted_sum(alpha, z, graph.offsets, graph.targets);
}

ad::Var activate(ad::Tape& tape, ad::Var x, Activation activation) {
  switch (activation) {
    case Activation::kElu: return tape.elu(x);
    case Activation::kRelu: return tape.leaky_relu(x, 0.0);
    case Activation::kIdentity: return x;
  }
  return x;
}

ad::Var aggregate(ad::Tape& tape, ad::Var alpha, ad::Var z, const AttentionGraph& graph,
                  Activation activation) {
  return activate(tape, aggregate_linear(tape, alpha, z, graph), activation);
}

ad::Var multi_head(ad::Tape& tape, ad::Var h, std::span<const HeadVars> heads,
                   const LayerConfig& config, const AttentionGraph& graph) {
  config.validate();
  if (heads.size() != config.heads) {
    fail(ErrorCode::kInvalidConfig, "layer expects " + std::to_string(config.heads) + " heads, got " +
                                        std::to_string(heads.size()));
  }
  if (tape.value(h).cols() != config.in_dim) {
    fail(ErrorCode::kShape, "layer input has " + std::to_string(tape.value(h).cols()) +
                                " features, expected " + std::to_string(config.in_dim));
  }
  for (const HeadVars& head : heads) {
    const ad::Tensor& q = tape.value(head.q);
    const ad::Tensor& a = tape.value(head.a);
    if (q.rows() != config.out_dim || q.cols() != config.in_dim || a.size() != 2 * config.out_dim) {
      fail(ErrorCode::kInvalidConfig, "attention head shapes disagree with the layer config");
    }
  }
  std::vector<ad::Var> outputs;
  outputs.reserve(heads.size());
  for (const HeadVars& head : heads) {
    const ad::Var z = transform(tape, h, head.q);
    const ad::Var alpha = masked_attention(tape, attention_logits(tape, z, head.a, graph, config.leaky_slope), graph);
    const ad::Var pre = aggregate_linear(tape, alpha, z, graph);
    outputs.push_back(config.combine == HeadCombine::kConcat ? activate(tape, pre, config.activation) : pre);
  }
  if (config.combine == HeadCombine::kConcat) {
    return outputs.size() == 1 ? outputs.front() : tape.concat_rows(outputs);
  }
  ad::Var total = outputs.front();
  for (std::size_t i = 1; i < outputs.size(); ++i) total = tape.add(total, outputs[i]);
  if (outputs.size() > 1) total = tape.scalar_mul(total, 1.0 / static_cast<double>(outputs.size()));
  return activate(tape, total, config.activation);
}

std::vector<double> dense_coefficients(const ad::Tensor& alpha, const AttentionGraph& graph) {
  std::vector<double> dense(graph.n * graph.n, 0.0);
  for (std::size_t e = 0; e < graph.edge_count(); ++e) {
    dense[graph.sources[e] * graph.n + graph.targets[e]] = alpha.values[e];
  }
  return dense;
}

}  // namespace gat
}  // namespace sigat
