#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sigat/model.hpp"

namespace sigat {

struct LabeledGraph {
  GraphInput input;
  std::size_t label = 0;
};

enum class Optimizer { kSgd, kAdam };

std::string to_string(Optimizer optimizer);
Optimizer parse_optimizer(const std::string& text);

struct TrainConfig {
  std::size_t epochs = 250;
  std::size_t batch_size = 4;
  double lr0 = 0.001;
  double lr_decay = 0.5;
  std::size_t decay_every = 50;
  std::uint64_t seed = 0;
  double gamma = 0.5;
  std::size_t k = kDefaultK;
  Optimizer optimizer = Optimizer::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

// lr0 * decay^floor(epoch / decay_every), epochs counted from 0.
double learning_rate(const TrainConfig& config, std::size_t epoch);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;
};

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  // confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
};

struct Metrics {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double test_accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;
};

struct TrainResult {
  Metrics metrics;
  SIGATModel best;
  SIGATModel last;
};

// Called after every epoch; used for log lines.
using EpochCallback = std::function<void(const EpochRecord&)>;

// Mean loss and mean gradient over `batch`. Per-graph work runs in parallel
// and is reduced in index order, so the result does not depend on threading.
LossAndGrad batch_gradients(const SIGATModel& model, std::span<const LabeledGraph* const> batch);
LossAndGrad batch_gradients_serial(const SIGATModel& model, std::span<const LabeledGraph* const> batch);

TrainResult train(SIGATModel model, std::span<const LabeledGraph> train_set,
                  std::span<const LabeledGraph> val_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

EvalResult evaluate(const SIGATModel& model, std::span<const LabeledGraph> dataset);

// CSV with header epoch,train_loss,val_loss,val_acc.
std::string metrics_csv(const Metrics& metrics);
std::string confusion_csv(const std::vector<std::vector<std::size_t>>& confusion,
                          std::span<const std::string> class_names);

}  // namespace sigat
