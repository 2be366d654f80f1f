#pragma once

// Stacked attention layers, mean-pool readout and a linear classifier.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sigat/autodiff.hpp"
#include "sigat/gat_layer.hpp"
#include "sigat/graph_builder.hpp"
#include "sigat/knn_sparsifier.hpp"

namespace sigat {

struct ModelConfig {
  std::size_t input_dim = kNodeFeatureDim;
  std::vector<LayerConfig> layers;
  std::size_t num_classes = 2;
  std::uint64_t seed = 0;

  std::size_t embedding_dim() const { return layers.empty() ? input_dim : layers.back().output_dim(); }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// `layers` attention layers of `heads` heads each: all but the last
// concatenate heads of width `hidden_per_head` (ELU), the last averages heads
// of width `output_dim` (identity) before the readout.
ModelConfig stacked_model_config(std::size_t num_classes, std::size_t layers, std::size_t heads,
                                 std::size_t hidden_per_head, std::size_t output_dim,
                                 std::uint64_t seed = 0);

// stacked_model_config(num_classes, 4, 8, 10, 152, seed).
ModelConfig default_model_config(std::size_t num_classes, std::uint64_t seed = 0);

struct SIGATModel {
  ModelConfig config;
  std::vector<std::vector<AttentionHead>> layers;
  ad::Tensor classifier_w;  // D x C
  ad::Tensor classifier_b;  // 1 x C

  std::size_t parameter_count() const;
  // Parameters in a fixed order: per layer, per head (Q, a); then W, b.
  std::vector<ad::Tensor> parameters() const;
  void set_parameters(std::vector<ad::Tensor> params);
  bool operator==(const SIGATModel&) const = default;
};

SIGATModel build_model(const ModelConfig& config);

// Everything the network consumes for one graph.
struct GraphInput {
  AttentionGraph graph;
  ad::Tensor features;  // M x F
};

GraphInput make_graph_input(const NodeSet& nodes, const SparseGraph& graph);

// Records the forward pass on `tape` and returns the 1 x C class logits.
// `params` must follow SIGATModel::parameters() order.
ad::Var forward_logits(ad::Tape& tape, std::span<const ad::Var> params, const ModelConfig& config,
                       const GraphInput& input);

// Cross-entropy of the softmax probabilities, clamped at 1e-12.
ad::Var classification_loss(ad::Tape& tape, ad::Var logits, std::size_t label);

std::vector<double> forward(const SIGATModel& model, const GraphInput& input);

// Index of the largest probability; ties go to the lowest class index.
std::size_t argmax(std::span<const double> probs);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<ad::Tensor> grads;
};

LossAndGrad loss_and_gradients(const SIGATModel& model, const GraphInput& input, std::size_t label);

}  // namespace sigat
