#include "sigat/train.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "sigat/error.hpp"
#include "sigat/format.hpp"
#include "sigat/rng.hpp"

namespace sigat {

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorCode::kInvalidConfig, "epochs must be >= 1");
  if (batch_size < 1) fail(ErrorCode::kInvalidConfig, "batch size must be >= 1");
  if (!(lr0 > 0.0)) fail(ErrorCode::kInvalidConfig, "learning rate must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) fail(ErrorCode::kInvalidConfig, "lr decay must lie in (0,1]");
  if (decay_every < 1) fail(ErrorCode::kInvalidConfig, "decay interval must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail(ErrorCode::kInvalidConfig, "gamma must lie in [0,1]");
  if (k < 1) fail(ErrorCode::kInvalidConfig, "k must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) ||
      !(adam_epsilon > 0.0)) {
    fail(ErrorCode::kInvalidConfig, "Adam betas must lie in [0,1) and epsilon must be > 0");
  }
}

std::string to_string(Optimizer optimizer) {
  return optimizer == Optimizer::kSgd ? "sgd" : "adam";
}

Optimizer parse_optimizer(const std::string& text) {
  if (text == "sgd") return Optimizer::kSgd;
  if (text == "adam") return Optimizer::kAdam;
  fail(ErrorCode::kParse, "unknown optimizer '" + text + "'");
}

double learning_rate(const TrainConfig& config, std::size_t epoch) {
  return config.lr0 * std::pow(config.lr_decay, static_cast<double>(epoch / config.decay_every));
}

namespace {

class ParameterUpdate {
 public:
  explicit ParameterUpdate(const TrainConfig& config) : config_(config) {}

  void apply(std::vector<ad::Tensor>& params, const std::vector<ad::Tensor>& grads, double lr) {
    if (config_.optimizer == Optimizer::kSgd) {
      for (std::size_t p = 0; p < params.size(); ++p) {
        auto& v = params[p].values;
        const auto& g = grads[p].values;
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
      }
      return;
    }
    if (first_.empty()) {
      for (const ad::Tensor& g : grads) {
        first_.emplace_back(g.size(), 0.0);
        second_.emplace_back(g.size(), 0.0);
      }
    }
    ++steps_;
    const double b1 = config_.adam_beta1;
    const double b2 = config_.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto& v = params[p].values;
      const auto& g = grads[p].values;
      auto& m = first_[p];
      auto& s = second_[p];
      for (std::size_t i = 0; i < v.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        s[i] = b2 * s[i] + (1.0 - b2) * g[i] * g[i];
        v[i] -= lr * (m[i] / c1) / (std::sqrt(s[i] / c2) + config_.adam_epsilon);
      }
    }
  }

 private:
  const TrainConfig& config_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::size_t steps_ = 0;
};

LossAndGrad reduce(std::vector<LossAndGrad>& parts) {
  LossAndGrad total = std::move(parts.front());
  for (std::size_t b = 1; b < parts.size(); ++b) {
    total.loss += parts[b].loss;
    for (std::size_t p = 0; p < total.grads.size(); ++p) {
      auto& dst = total.grads[p].values;
      const auto& src = parts[b].grads[p].values;
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }
  }
  const double scale = 1.0 / static_cast<double>(parts.size());
  total.loss *= scale;
  for (auto& g : total.grads) {
    for (double& v : g.values) v *= scale;
  }
  return total;
}

}  // namespace

LossAndGrad batch_gradients(const SIGATModel& model, std::span<const LabeledGraph* const> batch) {
  if (batch.empty()) fail(ErrorCode::kContract, "empty batch");
  std::vector<LossAndGrad> parts(batch.size());
  std::vector<std::string> errors(batch.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(batch.size()); ++b) {
    const auto i = static_cast<std::size_t>(b);
    try {
      parts[i] = loss_and_gradients(model, batch[i]->input, batch[i]->label);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const std::string& e : errors) {
    if (!e.empty()) fail(ErrorCode::kNumeric, e);
  }
  return reduce(parts);
}

LossAndGrad batch_gradients_serial(const SIGATModel& model, std::span<const LabeledGraph* const> batch) {
  if (batch.empty()) fail(ErrorCode::kContract, "empty batch");
  std::vector<LossAndGrad> parts;
  parts.reserve(batch.size());
  for (const LabeledGraph* g : batch) parts.push_back(loss_and_gradients(model, g->input, g->label));
  return reduce(parts);
}

EvalResult evaluate(const SIGATModel& model, std::span<const LabeledGraph> dataset) {
  if (dataset.empty()) fail(ErrorCode::kContract, "cannot evaluate on an empty dataset");
  const std::size_t classes = model.config.num_classes;
  std::vector<std::vector<double>> probs(dataset.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(dataset.size()); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    probs[idx] = forward(model, dataset[idx].input);
  }
  EvalResult result;
  result.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::size_t label = dataset[i].label;
    if (label >= classes) fail(ErrorCode::kContract, "label out of range for the model");
    const std::size_t predicted = argmax(probs[i]);
    ++result.confusion[label][predicted];
    if (predicted == label) ++correct;
    loss += -std::log(std::max(probs[i][label], 1e-12));
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(dataset.size());
  result.mean_loss = loss / static_cast<double>(dataset.size());
  return result;
}

TrainResult train(SIGATModel model, std::span<const LabeledGraph> train_set,
                  std::span<const LabeledGraph> val_set, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) fail(ErrorCode::kContract, "training set is empty");
  for (const LabeledGraph& g : train_set) {
    if (g.input.features.cols() != model.config.input_dim) {
      fail(ErrorCode::kShape, "training graphs do not share the model input dimension");
    }
  }

  TrainResult result;
  result.best = model;
  bool have_best = false;
  double best_acc = -1.0;
  double best_loss = 0.0;

  ParameterUpdate update(config);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = learning_rate(config, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 rng(derive_seed(config.seed, epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
    }

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::vector<const LabeledGraph*> batch;
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&train_set[order[i]]);
      LossAndGrad step;
      try {
        step = batch_gradients(model, batch);
      } catch (const Error& e) {
        fail(e.code(), "epoch " + std::to_string(epoch) + ", step " + std::to_string(start / config.batch_size) +
                           ": " + e.what());
      }
      if (!std::isfinite(step.loss)) {
        fail(ErrorCode::kNumeric, "epoch " + std::to_string(epoch) + ": non-finite training loss");
      }
      loss_sum += step.loss * static_cast<double>(batch.size());
      std::vector<ad::Tensor> params = model.parameters();
      update.apply(params, step.grads, lr);
      model.set_parameters(std::move(params));
    }

    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;
    record.train_loss = loss_sum / static_cast<double>(train_set.size());
    if (!val_set.empty()) {
      const EvalResult val = evaluate(model, val_set);
      record.val_loss = val.mean_loss;
      record.val_acc = val.accuracy;
    }
    result.metrics.epochs.push_back(record);
    const bool better = !have_best || val_set.empty() || record.val_acc > best_acc ||
                        (record.val_acc == best_acc && record.val_loss < best_loss);
    if (better) {
      have_best = true;
      best_acc = record.val_acc;
      best_loss = record.val_loss;
      result.best = model;
      result.metrics.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(record);
  }
  result.last = std::move(model);
  return result;
}

std::string metrics_csv(const Metrics& metrics) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,val_acc\n";
  for (const EpochRecord& r : metrics.epochs) {
    out << r.epoch << ',' << format_real(r.train_loss) << ',' << format_real(r.val_loss) << ','
        << format_real(r.val_acc) << '\n';
  }
  return out.str();
}

std::string confusion_csv(const std::vector<std::vector<std::size_t>>& confusion,
                          std::span<const std::string> class_names) {
  std::ostringstream out;
  out << "true\\predicted";
  for (std::size_t c = 0; c < confusion.size(); ++c) {
    out << ',' << (c < class_names.size() ? class_names[c] : std::to_string(c));
  }
  out << '\n';
  for (std::size_t r = 0; r < confusion.size(); ++r) {
    out << (r < class_names.size() ? class_names[r] : std::to_string(r));
    for (std::size_t v : confusion[r]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

}  // namespace sigat
