#include "sigat/model.hpp"

#include <cmath>

#include "sigat/error.hpp"
#include "sigat/rng.hpp"

namespace sigat {

void ModelConfig::validate() const {
  if (input_dim < 1) fail(ErrorCode::kInvalidConfig, "model input dimension must be positive");
  if (layers.empty()) fail(ErrorCode::kInvalidConfig, "model needs at least one attention layer");
  if (num_classes < 2) fail(ErrorCode::kInvalidConfig, "model needs at least 2 classes");
  std::size_t dim = input_dim;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].validate();
    if (layers[l].in_dim != dim) {
      fail(ErrorCode::kInvalidConfig, "layer " + std::to_string(l) + " expects input dim " +
                                          std::to_string(layers[l].in_dim) + " but receives " +
                                          std::to_string(dim));
    }
    dim = layers[l].output_dim();
  }
}

ModelConfig stacked_model_config(std::size_t num_classes, std::size_t layers, std::size_t heads,
                                 std::size_t hidden_per_head, std::size_t output_dim,
                                 std::uint64_t seed) {
  if (layers < 1) fail(ErrorCode::kInvalidConfig, "model needs at least one attention layer");
  ModelConfig config;
  config.input_dim = kNodeFeatureDim;
  config.num_classes = num_classes;
  config.seed = seed;
  std::size_t dim = config.input_dim;
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    config.layers.push_back({dim, hidden_per_head, heads, HeadCombine::kConcat, kLeakySlope, Activation::kElu});
    dim = config.layers.back().output_dim();
  }
  config.layers.push_back({dim, output_dim, heads, HeadCombine::kAverage, kLeakySlope, Activation::kIdentity});
  config.validate();
  return config;
}

ModelConfig default_model_config(std::size_t num_classes, std::uint64_t seed) {
  return stacked_model_config(num_classes, 4, 8, 10, 152, seed);
}

std::size_t SIGATModel::parameter_count() const {
  std::size_t total = classifier_w.size() + classifier_b.size();
  for (const auto& layer : layers) {
    for (const auto& head : layer) total += head.q.size() + head.a.size();
  }
  return total;
}

std::vector<ad::Tensor> SIGATModel::parameters() const {
  std::vector<ad::Tensor> params;
  for (const auto& layer : layers) {
    for (const auto& head : layer) {
      params.push_back(head.q);
      params.push_back(head.a);
    }
  }
  params.push_back(classifier_w);
  params.push_back(classifier_b);
  return params;
}

void SIGATModel::set_parameters(std::vector<ad::Tensor> params) {
  std::size_t i = 0;
  auto take = [&](ad::Tensor& dst) {
    if (i >= params.size() || params[i].shape != dst.shape) {
      fail(ErrorCode::kShape, "parameter " + std::to_string(i) + " does not match the model layout");
    }
    dst = std::move(params[i++]);
  };
  for (auto& layer : layers) {
    for (auto& head : layer) {
      take(head.q);
      take(head.a);
    }
  }
  take(classifier_w);
  take(classifier_b);
  if (i != params.size()) fail(ErrorCode::kShape, "too many parameter tensors for the model layout");
}

SIGATModel build_model(const ModelConfig& config) {
  config.validate();
  SIGATModel model;
  model.config = config;
  std::uint64_t stream = 0;
  for (const LayerConfig& layer : config.layers) {
    std::vector<AttentionHead> heads;
    for (std::size_t h = 0; h < layer.heads; ++h) {
      heads.push_back(init_head(layer.in_dim, layer.out_dim, derive_seed(config.seed, stream++)));
    }
    model.layers.push_back(std::move(heads));
  }
  const std::size_t d = config.embedding_dim();
  const std::size_t c = config.num_classes;
  model.classifier_w = ad::Tensor({d, c});
  model.classifier_b = ad::Tensor({1, c}, 0.0);
  SplitMix64 rng(derive_seed(config.seed, stream));
  const double s = std::sqrt(6.0 / static_cast<double>(d + c));
  for (double& v : model.classifier_w.values) v = rng.uniform(-s, s);
  return model;
}

GraphInput make_graph_input(const NodeSet& nodes, const SparseGraph& graph) {
  if (nodes.size() != graph.n) fail(ErrorCode::kShape, "node set and graph disagree on node count");
  GraphInput input;
  input.graph = attention_graph(graph);
  const std::size_t f = nodes.feature_dim();
  input.features = ad::Tensor({nodes.size(), f});
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes.nodes[i].features.size() != f) fail(ErrorCode::kShape, "inconsistent node feature length");
    std::copy(nodes.nodes[i].features.begin(), nodes.nodes[i].features.end(),
              input.features.values.begin() + static_cast<std::ptrdiff_t>(i * f));
  }
  return input;
}

ad::Var forward_logits(ad::Tape& tape, std::span<const ad::Var> params, const ModelConfig& config,
                       const GraphInput& input) {
  if (input.features.cols() != config.input_dim) {
    fail(ErrorCode::kShape, "graph features have dim " + std::to_string(input.features.cols()) +
                                ", model expects " + std::to_string(config.input_dim));
  }
  if (input.features.rows() != input.graph.n) {
    fail(ErrorCode::kShape, "feature rows do not match the graph node count");
  }
  ad::Var h = tape.constant(input.features);
  std::size_t p = 0;
  for (const LayerConfig& layer : config.layers) {
    std::vector<gat::HeadVars> heads;
    for (std::size_t k = 0; k < layer.heads; ++k) {
      heads.push_back({params[p], params[p + 1]});
      p += 2;
    }
    h = gat::multi_head(tape, h, heads, layer, input.graph);
  }
  const ad::Var pooled = tape.mean_over_rows(h);
  return tape.add(tape.matmul(pooled, params[p]), params[p + 1]);
}

ad::Var classification_loss(ad::Tape& tape, ad::Var logits, std::size_t label) {
  return tape.neg_log_prob(tape.softmax_rows(logits), label, 1e-12);
}

std::vector<double> forward(const SIGATModel& model, const GraphInput& input) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (ad::Tensor& t : model.parameters()) vars.push_back(tape.constant(std::move(t)));
  const ad::Var probs = tape.softmax_rows(forward_logits(tape, vars, model.config, input));
  return tape.value(probs).values;
}

std::size_t argmax(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < probs.size(); ++c) {
    if (probs[c] > probs[best]) best = c;
  }
  return best;
}

LossAndGrad loss_and_gradients(const SIGATModel& model, const GraphInput& input, std::size_t label) {
  if (label >= model.config.num_classes) fail(ErrorCode::kContract, "label out of range");
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (ad::Tensor& t : model.parameters()) vars.push_back(tape.parameter(std::move(t)));
  const ad::Var loss = classification_loss(tape, forward_logits(tape, vars, model.config, input), label);
  LossAndGrad out;
  out.loss = tape.value(loss).values[0];
  out.grads = tape.backward(loss);
  return out;
}

}  // namespace sigat
